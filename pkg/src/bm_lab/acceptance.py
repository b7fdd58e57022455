"""Acceptance criteria as callables returning :class:`CriterionResult`.

Each criterion is deterministic for its fixed seed. ``quick=True`` lowers
refinement and batch sizes; tolerances stay the same except where the
coarser mesh makes a threshold unreachable (noted per criterion).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import reports
from .body import BodyGeometry, ball, ellipse, translate, validate_in_S
from .extensions import first_bessel_zero
from .functionals import capacity_ball, solve_eigen, solve_torsion, torsion_ball
from .inequalities import (
    TorsionEvaluator,
    bm_concavity_scan,
    local_theorem_scan,
    minkowski_corollaries,
    poincare_capacity_ball,
    poincare_eigen_ball,
    poincare_log_ball,
    poincare_torsion_ball,
    theorem_family_body,
)
from .phispec import field_from_terms, format_phi, random_even_terms
from .spherical import build_grid
from .variations import torsion_variation_lp, torsion_variation_log

__all__ = ["CriterionResult", "CRITERIA", "run_criterion", "run_all", "Settings"]

SEED = 20240601
GRID_2D = 64
GRID_3D = 16


@dataclass(frozen=True)
class Settings:
    quick: bool = False

    @property
    def refinement(self) -> int:
        return 2 if self.quick else 3

    def count(self, full: int, quick: int) -> int:
        return quick if self.quick else full


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    data: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"criterion {self.number:2d} {tag}  {self.title}: {self.detail}"

    def to_dict(self) -> dict:
        return {"number": self.number, "title": self.title, "passed": self.passed,
                "detail": self.detail, "data": self.data}


def _disk(res: int = GRID_2D) -> BodyGeometry:
    return validate_in_S(ball(2, res))


def _rel(a: float, b: float) -> float:
    return abs(a - b) / abs(b)


def c01(st: Settings) -> CriterionResult:
    t0 = time.perf_counter()
    sol = solve_torsion(_disk(), st.refinement)
    dt = time.perf_counter() - t0
    err = _rel(sol.value, math.pi / 8)
    tri = sol.extra["n_triangles"]
    ok = err < 5e-3 and (st.quick or tri >= 20000) and dt < 10.0
    return CriterionResult(1, "disk torsion", ok, f"T={sol.value:.7f} rel.err={err:.2e} triangles={tri}",
                           {"value": sol.value, "rel_err": err, "triangles": tri})


def c02(st: Settings) -> CriterionResult:
    sol = solve_torsion(_disk(), st.refinement)
    err = float(np.max(np.abs(sol.boundary_speed.values - 0.5))) / 0.5
    return CriterionResult(2, "disk boundary speed", err < 5e-3, f"max rel. deviation from 1/2 = {err:.2e}",
                           {"max_rel_dev": err})


def c03(st: Settings) -> CriterionResult:
    a, b = 1.5, 1.0
    exact = math.pi * a**3 * b**3 / (4 * (a * a + b * b))
    sol = solve_torsion(validate_in_S(ellipse(a, b, GRID_2D)), st.refinement)
    err = _rel(sol.value, exact)
    return CriterionResult(3, "ellipse torsion", err < 5e-3,
                           f"T={sol.value:.7f} exact={exact:.7f} rel.err={err:.2e}",
                           {"value": sol.value, "exact": exact, "rel_err": err})


def c04(st: Settings) -> CriterionResult:
    j = first_bessel_zero(0.0, 2.0, 3.0)
    sol = solve_eigen(_disk(), st.refinement)
    err = _rel(sol.value, j * j)
    return CriterionResult(4, "disk eigenvalue", err < 5e-3,
                           f"lambda={sol.value:.6f} j0^2={j * j:.6f} rel.err={err:.2e}",
                           {"value": sol.value, "exact": j * j, "rel_err": err})


def _variation_battery(st: Settings) -> list:
    rng = np.random.default_rng(SEED + 5)
    out = []
    for _ in range(st.count(10, 2)):
        degs = [2, 4, 6][: int(rng.integers(1, 4))]
        terms = random_even_terms(rng, 2, degs, amplitude=0.1, mean=1.0)
        out.append(terms)
    return out


def c05(st: Settings) -> CriterionResult:
    t0 = time.perf_counter()
    geom = _disk()
    sol = solve_torsion(geom, st.refinement)
    rows = []
    worst1 = worst2 = 0.0
    for terms in _variation_battery(st):
        f = field_from_terms(terms, geom.grid)
        label = format_phi(terms)
        for p in (0.5, 1.0, 2.0):
            r = torsion_variation_lp(geom, sol, f, p, label=label)
            rows.append(r.to_dict())
            worst1, worst2 = max(worst1, r.gap_first), max(worst2, r.gap_second)
        r = torsion_variation_log(geom, sol, f.with_values(0.5 * f.values), label="0.5*(" + label + ")")
        rows.append(r.to_dict())
        worst1, worst2 = max(worst1, r.gap_first), max(worst2, r.gap_second)
    dt = time.perf_counter() - t0
    ok = worst1 < 1e-2 and worst2 < 5e-2 and dt < 300
    return CriterionResult(5, "variational formulas vs finite differences", ok,
                           f"{len(rows)} reports, worst gaps first={worst1:.2e} second={worst2:.2e}",
                           {"reports": rows, "worst_first": worst1, "worst_second": worst2})


def c06(st: Settings) -> CriterionResult:
    r = st.refinement
    h = ellipse(1.3, 1.0, GRID_2D)
    T = solve_torsion(validate_in_S(h), r).value
    m = 1.7
    Tm = solve_torsion(validate_in_S(h.scaled(m)), r).value
    Tt = solve_torsion(validate_in_S(translate(h, [0.2, -0.1])), r).value
    hom = _rel(Tm / T, m**4)
    tra = _rel(Tt, T)
    cap = capacity_ball(3, m).value == m * capacity_ball(3, 1.0).value
    lam = solve_eigen(_disk(), r).value
    lam_m = solve_eigen(validate_in_S(ball(2, GRID_2D, m)), r).value
    eig = _rel(lam_m / lam, m**-2)
    ok = hom < 1e-3 and tra < 1e-3 and cap and eig < 1e-3
    return CriterionResult(6, "homogeneity and translation", ok,
                           f"T scaling {hom:.1e}, translation {tra:.1e}, capacity exact={cap}, lambda {eig:.1e}",
                           {"torsion_scaling": hom, "translation": tra, "capacity_exact": cap,
                            "eigen_scaling": eig})


def _zero_mean_battery(n: int, count: int, seed: int) -> list:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        top = int(rng.choice([2, 4, 6, 8]))
        degs = list(range(2, top + 1, 2))
        out.append(random_even_terms(rng, n, degs, amplitude=1.0))
    return out


def _grid(n: int):
    return build_grid(n, GRID_2D if n == 2 else GRID_3D)


def _ball_battery(st: Settings, log: bool) -> tuple[bool, list, str]:
    rows = []
    ok = True
    worst_est = 0.0
    worst_gap = 0.0
    for n in (2, 3):
        grid = _grid(n)
        rng = np.random.default_rng(SEED + 7 * n)
        for terms in _zero_mean_battery(n, st.count(100, 20), SEED + n):
            f = field_from_terms(terms, grid)
            if log:
                rep = poincare_log_ball(f, label=format_phi(terms))
            else:
                rep = poincare_torsion_ball(f, float(rng.uniform(0.1, 3.0)), label=format_phi(terms))
            ok &= rep.verdict == "pass" and rep.est_error <= 1e-10
            worst_est = max(worst_est, rep.est_error)
            rows.append(rep.to_dict())
        for terms in _zero_mean_battery(n, st.count(10, 3), SEED + 11 * n):
            deg2 = [t for t in terms if t[0] == 2]
            f = field_from_terms(deg2, grid)
            rep = poincare_log_ball(f) if log else poincare_torsion_ball(f, 1.0)
            gap = rep.artifacts["spectral_gap"]
            g = abs(gap["gradient"] - gap["bound"]) / gap["bound"]
            worst_gap = max(worst_gap, g)
            ok &= g <= 1e-10 and rep.verdict == "pass"
    return ok, rows, f"{len(rows)} inputs, max est={worst_est:.1e}, degree-2 identity gap={worst_gap:.1e}"


def c07(st: Settings) -> CriterionResult:
    ok, rows, msg = _ball_battery(st, log=False)
    return CriterionResult(7, "ball Poincare inequality (torsion)", ok, msg, {"reports": rows})


def c08(st: Settings) -> CriterionResult:
    ok, rows, msg = _ball_battery(st, log=True)
    return CriterionResult(8, "ball log-Poincare inequality (torsion)", ok, msg, {"reports": rows})


def c09(st: Settings) -> CriterionResult:
    grid = _grid(3)
    rng = np.random.default_rng(SEED + 9)
    rows = []
    ok = True
    for terms in _zero_mean_battery(3, st.count(30, 6), SEED + 19):
        terms = [(0, 0, float(rng.uniform(0.5, 2.0)))] + terms
        p = float(rng.choice([1.0, 1.5, 2.0, 4.0]))
        rep = poincare_capacity_ball(field_from_terms(terms, grid), p, label=format_phi(terms))
        ok &= rep.verdict == "pass"
        rows.append(rep.to_dict())
    dil = poincare_capacity_ball(field_from_terms([(0, 0, 1.0)], grid), 1.0)
    ok &= abs(dil.margin) <= 1e-10 and dil.verdict != "fail"
    return CriterionResult(9, "ball capacity Poincare inequality", ok,
                           f"{len(rows)} inputs pass={ok}, dilation margin={dil.margin:.1e}",
                           {"reports": rows, "dilation": dil.to_dict()})


def c10(st: Settings) -> CriterionResult:
    grid = _grid(2)
    rows = []
    ok = True
    worst_res = 0.0
    for terms in _zero_mean_battery(2, st.count(30, 6), SEED + 10):
        rep = poincare_eigen_ball(field_from_terms(terms, grid), label=format_phi(terms))
        res = rep.artifacts["radial_residual"]
        worst_res = max(worst_res, res)
        ok &= rep.verdict == "pass" and res < 1e-8
        rows.append(rep.to_dict())
    return CriterionResult(10, "ball eigenvalue Poincare inequality", ok,
                           f"{len(rows)} inputs, max radial residual={worst_res:.1e}", {"reports": rows})


def _theorem_scans(st: Settings, ps) -> tuple[bool, list, str]:
    grid = _grid(2)
    phi = field_from_terms([(2, 0, 1.0)], grid)
    ok = True
    rows = []
    msgs = []
    for p in ps:
        ev = TorsionEvaluator(st.refinement)
        s_grid = None if not st.quick else np.linspace(0, 1, 11)
        rep = local_theorem_scan(phi, p, 0.05, n_pairs=st.count(11, 5), s_grid=s_grid, label="l2:1.0",
                                 evaluator=ev)
        c = rep.artifacts["counts"]
        point_ok = all(pr["margin"] > -3 * pr["est_error"] for pr in rep.artifacts["pairs"])
        ok &= c["fail"] == 0 and point_ok
        rows.append(rep.to_dict())
        msgs.append(f"p={p}: pass={c['pass']} inconclusive={c['inconclusive']} fail={c['fail']}")
    return ok, rows, "; ".join(msgs)


def c11(st: Settings) -> CriterionResult:
    t0 = time.perf_counter()
    ok, rows, msg = _theorem_scans(st, (0.25, 0.5, 0.75))
    dt = time.perf_counter() - t0
    return CriterionResult(11, "local L_p Brunn-Minkowski scans", ok and dt < 900, msg, {"reports": rows})


def c12(st: Settings) -> CriterionResult:
    t0 = time.perf_counter()
    ok, rows, msg = _theorem_scans(st, (0.0,))
    dt = time.perf_counter() - t0
    return CriterionResult(12, "local log Brunn-Minkowski scans", ok and dt < 900, msg, {"reports": rows})


def c13(st: Settings) -> CriterionResult:
    b1, b2 = ball(2, GRID_2D), ball(2, GRID_2D, 2.0)
    rows = []
    ok = True
    for p in (0.0, 0.5, 1.0):
        s_grid = None if not st.quick else np.linspace(0, 1, 6)
        rep = bm_concavity_scan(b1, b2, p, s_grid, refinement=st.refinement)
        m = np.array(rep.artifacts["chord_margin"])
        e = np.array(rep.artifacts["chord_est"])
        ok &= bool(np.all(np.abs(m) <= 3 * e)) and rep.verdict != "fail"
        rows.append(rep.to_dict())
    for p in (0.25, 0.5):
        for rep in minkowski_corollaries(b1, b2, p, refinement=st.refinement):
            ok &= abs(rep.margin) <= 3 * rep.est_error
            rows.append(rep.to_dict())
    worst = max(abs(r["margin"]) / r["est_error"] for r in rows)
    return CriterionResult(13, "equality for dilates", ok,
                           f"{len(rows)} reports, max |margin|/est={worst:.2f}", {"reports": rows})


def c14(st: Settings) -> CriterionResult:
    grid = _grid(2)
    phi = field_from_terms([(2, 0, 1.0)], grid)
    n_pairs = st.count(11, 3)
    ok = True
    counts = {"pass": 0, "fail": 0, "inconclusive": 0}
    rows = []
    for p in (0.0, 0.25, 0.5, 0.75):
        cache: dict = {}
        s = np.linspace(-0.05, 0.05, n_pairs)
        bodies = [theorem_family_body(phi, p, float(x)) for x in s]
        for i in range(n_pairs):
            for j in range(n_pairs):
                for rep in minkowski_corollaries(bodies[i], bodies[j], p, st.refinement, label="l2:1.0",
                                                 cache=cache):
                    counts[rep.verdict] += 1
                    if i == j:
                        ok &= abs(rep.margin) <= 3 * rep.est_error
                    else:
                        ok &= rep.verdict == "pass"
                    rows.append({"p": p, "s1": float(s[i]), "s2": float(s[j]), "name": rep.name,
                                 "margin": rep.margin, "est_error": rep.est_error, "verdict": rep.verdict})
    return CriterionResult(14, "Minkowski-type corollaries", ok,
                           f"pass={counts['pass']} inconclusive={counts['inconclusive']} fail={counts['fail']}",
                           {"pairs": rows})


def c15(st: Settings) -> CriterionResult:
    from .cli import run_command

    argv_list = [
        ["verify", "ball-poincare", "--n", "3", "--p", "0.5", "--random", "3", "--seed", "7"],
        ["scan", "bm", "--n", "2", "--p", "0.5", "--phi", "l2:1.0", "--eps", "0.05",
         "--refinement", "1"],
        ["check", "variational", "--p", "0.5", "--phi", "l0:1.0;l2:0.1", "--refinement", "1"],
    ]
    same = True
    digests = []
    for argv in argv_list:
        a = run_command(argv)[0]
        b = run_command(argv)[0]
        same &= a == b
        digests.append(len(a))
    return CriterionResult(15, "determinism", same, f"{len(argv_list)} commands byte-identical={same}",
                           {"bytes": digests})


CRITERIA: dict[int, Callable[[Settings], CriterionResult]] = {
    1: c01, 2: c02, 3: c03, 4: c04, 5: c05, 6: c06, 7: c07, 8: c08,
    9: c09, 10: c10, 11: c11, 12: c12, 13: c13, 14: c14, 15: c15,
}


def run_criterion(number: int, quick: bool = False) -> CriterionResult:
    t0 = time.perf_counter()
    res = CRITERIA[number](Settings(quick))
    res.seconds = time.perf_counter() - t0
    return res


def run_all(quick: bool = False, numbers=None, echo: Callable[[str], None] = print) -> list:
    out = []
    for k in numbers or sorted(CRITERIA):
        try:
            r = run_criterion(k, quick)
        except Exception as exc:  # recorded, suite continues
            r = CriterionResult(k, CRITERIA[k].__name__, False, f"error: {type(exc).__name__}: {exc}")
        echo(f"{r.line()}  [{r.seconds:.1f} s]")
        out.append(r)
    return out


def acceptance_document(results: list, quick: bool) -> dict:
    return reports.document("acceptance", {"quick": quick}, [r.to_dict() for r in results])
