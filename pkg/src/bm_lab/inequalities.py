"""Verifiers for Brunn-Minkowski type concavity and the associated Poincare-type inequalities.

Every verifier returns an :class:`InequalityReport` with ``margin = rhs - lhs``
(so the inequality reads lhs <= rhs) and a ternary verdict gated at
three times the numerical error estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .body import BodyGeometry, SupportFunction, field_gradient, log_sum, lp_sum, validate_in_S
from .errors import DegenerateInputError, ParityError, ResonanceError
from .extensions import (
    exterior_harmonic_extension,
    helmholtz_ball_extension,
    interior_harmonic_extension,
)
from .functionals import (
    FunctionalSolution,
    boundary_torsion,
    eigen_ball,
    is_ball,
    linearized_trace,
    mixed_torsion,
    solve_torsion,
    torsion_ball,
)
from .phispec import field_from_terms, format_phi
from .spherical import FieldOnSphere, analyze, build_grid, integrate, sphere_area, spherical_gradient_sq

__all__ = [
    "InequalityReport",
    "classify",
    "TorsionEvaluator",
    "bm_concavity_scan",
    "local_theorem_scan",
    "poincare_torsion_general",
    "poincare_torsion_ball",
    "poincare_log_ball",
    "poincare_capacity_ball",
    "poincare_eigen_ball",
    "problem_a_form",
    "minkowski_corollaries",
    "theorem_family_body",
]

ROUNDOFF = 64 * np.finfo(float).eps
SCAN_POINTS = 21
DEFAULT_REFINEMENT = 3


def classify(margin: float, est: float) -> str:
    if margin >= 3.0 * est:
        return "pass"
    if margin < -3.0 * est:
        return "fail"
    return "inconclusive"


def _f(x):
    if isinstance(x, np.ndarray):
        return [float(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return float(x)
    return x


@dataclass
class InequalityReport:
    name: str
    params: dict
    lhs: object
    rhs: object
    margin: float
    est_error: float
    verdict: str
    artifacts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "params": self.params,
            "lhs": _f(self.lhs),
            "rhs": _f(self.rhs),
            "margin": float(self.margin),
            "est_error": float(self.est_error),
            "verdict": self.verdict,
            "artifacts": self.artifacts,
        }


def _report(name, params, lhs, rhs, est, artifacts=None) -> InequalityReport:
    margin = float(rhs - lhs)
    return InequalityReport(name, params, float(lhs), float(rhs), margin, float(est),
                            classify(margin, est), artifacts or {})


def _roundoff(*terms) -> float:
    return ROUNDOFF * float(sum(abs(t) for t in terms)) + 1e-300


# ---------------- ball spectral forms ----------------


def _require_even(f: FieldOnSphere, what: str) -> None:
    if not f.is_even():
        raise ParityError(f"{what} must be even")


def _require_nonconstant(f: FieldOnSphere, what: str) -> None:
    e = analyze(f, f.grid.max_degree)
    if np.all(np.abs(e.coeffs[1:]) <= 1e-14 * max(1.0, abs(e.coeffs[0]))):
        raise DegenerateInputError(f"{what} is constant; the inequality is an identity there")


def _spectral_gap(f: FieldOnSphere, grad: float, sq: float, mean_sq: float) -> dict:
    """Check int |grad f|^2 >= 2n int (f - mean)^2 for even data."""
    n = f.grid.dim_n
    centered = sq - mean_sq
    return {"gradient": grad, "centered_l2": centered, "bound": 2 * n * centered,
            "holds": bool(grad >= 2 * n * centered - _roundoff(grad, centered))}


def _ball_torsion_terms(f: FieldOnSphere, p: float) -> dict:
    n = f.grid.dim_n
    data_scale = p * n if p > 0 else n
    ext = interior_harmonic_extension(f.with_values(f.values / data_scale), f.grid.max_degree)
    energy = ext.energy()
    grad = spherical_gradient_sq(f, f.grid.max_degree)
    sq = integrate(f.with_values(f.values**2))
    mean = integrate(f)
    area = sphere_area(n)
    return {"gradient": grad, "energy": energy, "energy_term": 2 * data_scale**2 * energy,
            "l2": sq, "mean_sq": mean * mean / area, "n": n}


def poincare_torsion_ball(phi_p: FieldOnSphere, p: float, label: Optional[str] = None) -> InequalityReport:
    """Infinitesimal L_p-BM inequality for torsion at the unit ball, p > 0 (``phi_p`` is phi^p)."""
    if p <= 0:
        raise ValueError("p must be positive; use poincare_log_ball for p = 0")
    _require_even(phi_p, "phi^p")
    _require_nonconstant(phi_p, "phi^p")
    t = _ball_torsion_terms(phi_p, p)
    n = t["n"]
    lhs = (p - 2 - n) * t["mean_sq"] + (n + 2 - p) * t["l2"]
    rhs = t["gradient"] + t["energy_term"]
    est = _roundoff(lhs, rhs, t["gradient"], t["energy_term"], t["l2"])
    art = {"terms": t, "spectral_gap": _spectral_gap(phi_p, t["gradient"], t["l2"], t["mean_sq"])}
    return _report("poincare_torsion_ball", {"n": n, "p": p, "phi": label}, lhs, rhs, est, art)


def poincare_log_ball(phi: FieldOnSphere, label: Optional[str] = None) -> InequalityReport:
    """Infinitesimal log-BM inequality for torsion at the unit ball."""
    _require_even(phi, "phi")
    _require_nonconstant(phi, "phi")
    t = _ball_torsion_terms(phi, 0.0)
    n = t["n"]
    lhs = (n + 2) * (t["l2"] - t["mean_sq"])
    rhs = t["gradient"] + t["energy_term"]
    est = _roundoff(lhs, rhs, t["gradient"], t["energy_term"], t["l2"])
    art = {"terms": t, "spectral_gap": _spectral_gap(phi, t["gradient"], t["l2"], t["mean_sq"])}
    return _report("poincare_log_ball", {"n": n, "p": 0.0, "phi": label}, lhs, rhs, est, art)


def poincare_capacity_ball(psi_p: FieldOnSphere, p: float, q: float = 2.0,
                           label: Optional[str] = None) -> InequalityReport:
    """Capacity Poincare-type inequality at the unit ball of R^3 (q = 2, |grad U| = 1)."""
    if q != 2.0:
        raise ValueError("only q = 2 is supported")
    if p < 1:
        raise ValueError("the capacity inequality is stated for p >= 1")
    grid = psi_p.grid
    n = grid.dim_n
    if n != 3:
        raise ValueError("capacity verifier needs n = 3")
    _require_even(psi_p, "psi^p")
    cap = (n - 2) * sphere_area(n)
    w = psi_p.values
    ext = exterior_harmonic_extension(psi_p.with_values(w / p), 3, grid.max_degree)
    dn = ext.radial_derivative(grid).values
    I = lambda v: float(np.dot(grid.weights, v))  # noqa: E731
    terms = {
        "mean": (p + q - n) / ((n - q) * cap) * I(w) ** 2,
        "l2": (1 - p) * (q - 1) * I(w**2),
        "udot": -p * q * (q - 1) * I(w * dn),
        "curvature": -(n - 1) * I(w**2),
    }
    lhs = sum(terms.values())
    rhs = (q - 1) * spherical_gradient_sq(psi_p, grid.max_degree)
    est = _roundoff(rhs, *terms.values())
    return _report("poincare_capacity_ball", {"n": n, "p": p, "q": q, "psi": label}, lhs, rhs, est,
                   {"terms": terms, "gradient": rhs})


def poincare_eigen_ball(psi: FieldOnSphere, label: Optional[str] = None,
                        mean_tol: float = 1e-12) -> InequalityReport:
    """Zero-mean eigenvalue Poincare-type inequality at the unit disk."""
    grid = psi.grid
    if grid.dim_n != 2:
        raise ValueError("eigenvalue verifier needs n = 2")
    _require_even(psi, "psi")
    sol = eigen_ball(2, 1.0, grid)
    g = float(sol.boundary_speed.values[0])
    lam = sol.value
    scale = max(1.0, float(np.max(np.abs(psi.values))))
    if abs(integrate(psi)) > mean_tol * scale:
        raise ResonanceError("psi must have zero mean against the eigenvalue measure")
    params = {"n": 2, "psi": label, "lambda": lam}
    if not np.any(psi.values):
        return _report("poincare_eigen_ball", params, 0.0, 0.0, 1e-300, {"radial_residual": 0.0})
    ext = helmholtz_ball_extension(psi.with_values(psi.values * g), lam, grid.max_degree)
    dn = ext.radial_derivative(grid).values
    I = lambda v: float(np.dot(grid.weights, v))  # noqa: E731
    terms = {
        "udot": -2.0 * g * I(psi.values * dn),
        "curvature": -(g**2) * I(psi.values**2),
    }
    lhs = terms["udot"] + terms["curvature"]
    rhs = g**2 * spherical_gradient_sq(psi, grid.max_degree)
    est = _roundoff(rhs, *terms.values()) + abs(lhs) * ext.ode_residual
    return _report("poincare_eigen_ball", params, lhs, rhs, est,
                   {"terms": terms, "gradient": rhs, "radial_residual": ext.ode_residual})


# ---------------- general bodies ----------------


def _general_terms(geom: BodyGeometry, sol: FunctionalSolution, w: np.ndarray, p: float) -> dict:
    n = geom.dim_n
    s = sol.boundary_speed.values
    det = geom.surface_density
    h = geom.h.values
    wf = geom.field(w)
    trace = linearized_trace(sol, geom, wf).values
    grad = field_gradient(wf)
    I = lambda v: float(np.dot(geom.grid.weights, v))  # noqa: E731
    T = boundary_torsion(geom, s)
    A = I(w * s**2 * det)
    return {
        "T": T,
        "mean": (p - n - 2) / ((n + 2) * T) * A * A,
        "l2": (1 - p) * I(w * w / h * s**2 * det),
        "udot": -2.0 * I(w * s * det * trace),
        "speed": 2.0 * I(w * w * s * det),
        "curvature": -I(geom.trace_cofactor * s**2 * w * w),
        "gradient": I(s**2 * geom.quadratic_form(grad)),
    }


def _general_margin(t: dict) -> tuple[float, float]:
    lhs = t["mean"] + t["l2"] + t["udot"] + t["speed"] + t["curvature"]
    return lhs, t["gradient"]


def _weight(geom: BodyGeometry, phi: FieldOnSphere, p: float) -> np.ndarray:
    if phi.grid is not geom.grid:
        raise ValueError("phi and body live on different grids")
    h = geom.h.values
    return h ** (1.0 - p) * phi.values if p > 0 else h * phi.values


def _coarse(geom: BodyGeometry, sol: FunctionalSolution) -> Optional[FunctionalSolution]:
    if sol.tag != "fem" or not sol.refinement:
        return None
    return solve_torsion(geom, sol.refinement - 1)


def _general_report(name, geom, sol, phi, p, label, coarse, extra_params=None) -> InequalityReport:
    w = _weight(geom, phi, p)
    t = _general_terms(geom, sol, w, p)
    lhs, rhs = _general_margin(t)
    est = _roundoff(lhs, rhs, *t.values())
    if coarse is None:
        coarse = _coarse(geom, sol)
    if coarse is not None:
        lc, rc = _general_margin(_general_terms(geom, coarse, w, p))
        est += abs((rhs - lhs) - (rc - lc)) / 3.0
    params = {"n": geom.dim_n, "p": p, "phi": label, "refinement": sol.refinement, "tag": sol.tag}
    params.update(extra_params or {})
    return _report(name, params, lhs, rhs, est, {"terms": t})


def poincare_torsion_general(geom: BodyGeometry, sol: FunctionalSolution, psi_p: FieldOnSphere, p: float,
                             label: Optional[str] = None,
                             coarse: Optional[FunctionalSolution] = None) -> InequalityReport:
    """Poincare-type inequality for torsion on a planar body, p >= 1 (``psi_p`` is psi^p on the sphere)."""
    if p < 1:
        return problem_a_form(geom, sol, psi_p, p, label=label, coarse=coarse)
    if sol.kind != "torsion":
        raise ValueError("needs a torsion solution")
    return _general_report("poincare_torsion_general", geom, sol, psi_p, p, label, coarse)


def problem_a_form(geom: BodyGeometry, sol: FunctionalSolution, phi: FieldOnSphere, p: float,
                   label: Optional[str] = None,
                   coarse: Optional[FunctionalSolution] = None) -> InequalityReport:
    """Infinitesimal L_p-BM inequality for torsion, 0 <= p < 1.

    ``phi`` is phi^p for p > 0 and log(phi~) for p = 0. Non-ball bodies are
    flagged exploratory.
    """
    if not 0 <= p < 1:
        raise ValueError("p must lie in [0, 1)")
    if sol.kind != "torsion":
        raise ValueError("needs a torsion solution")
    _require_even(phi, "phi")
    exploratory = is_ball(geom.h) is None
    rep = _general_report("problem_a_form", geom, sol, phi, p, label, coarse, {"exploratory": exploratory})
    rep.artifacts["exploratory"] = exploratory
    return rep


# ---------------- concavity scans ----------------


class TorsionEvaluator:
    """Memoized FEM torsion at two refinements (value, coarse value)."""

    def __init__(self, refinement: int = DEFAULT_REFINEMENT):
        if refinement < 1:
            raise ValueError("refinement must be at least 1 to estimate errors")
        self.refinement = refinement
        self._cache: dict = {}
        self.solves = 0

    @staticmethod
    def key(h: SupportFunction) -> bytes:
        return np.round(h.values, 12).tobytes() + bytes([h.grid.dim_n]) + h.grid.resolution.to_bytes(4, "little")

    def __call__(self, h: SupportFunction) -> tuple[float, float]:
        k = self.key(h)
        if k not in self._cache:
            g = validate_in_S(h)
            fine = solve_torsion(g, self.refinement, keep_context=False).value
            coarse = solve_torsion(g, self.refinement - 1, keep_context=False).value
            self._cache[k] = (fine, coarse)
            self.solves += 1
        return self._cache[k]


def _transform(T: np.ndarray, p: float, n: int) -> np.ndarray:
    return np.log(T) if p == 0 else T ** (p / (n + 2))


def _chord_data(v: np.ndarray, s: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    chord = (1 - s) * v[0] + s * v[-1]
    d2 = np.full(len(s), np.nan)
    hs = np.diff(s)
    for i in range(1, len(s) - 1):
        d2[i] = 2 * ((v[i + 1] - v[i]) / hs[i] - (v[i] - v[i - 1]) / hs[i - 1]) / (hs[i] + hs[i - 1])
    return chord, v - chord, d2


def bm_concavity_scan(h1: SupportFunction, h2: SupportFunction, p: float,
                      s_grid: Optional[Sequence[float]] = None, refinement: int = DEFAULT_REFINEMENT,
                      evaluator: Optional[TorsionEvaluator] = None, label: Optional[str] = None,
                      floor: float = 1e-9) -> InequalityReport:
    """Concavity of s -> T^{p/(n+2)} (log T for p = 0) along the L_p combination of two bodies."""
    if p < 0:
        raise ValueError("p must be non-negative")
    n = h1.dim_n
    if n != 2:
        raise ValueError("scans need n = 2")
    s = np.linspace(0.0, 1.0, SCAN_POINTS) if s_grid is None else np.asarray(s_grid, dtype=float)
    if len(s) < 3 or s[0] != 0.0 or s[-1] != 1.0 or np.any(np.diff(s) <= 0):
        raise ValueError("s_grid must increase from 0 to 1 with at least 3 points")
    ev = evaluator if evaluator is not None else TorsionEvaluator(refinement)
    combine = (lambda t: log_sum(h1, h2, t)) if p == 0 else (lambda t: lp_sum(h1, h2, p, t))
    vals = np.array([ev(combine(float(t))) for t in s])
    v_f = _transform(vals[:, 0], p, n)
    v_c = _transform(vals[:, 1], p, n)
    chord, m_f, d2_f = _chord_data(v_f, s)
    _, m_c, d2_c = _chord_data(v_c, s)
    scale = float(np.max(np.abs(v_f)))
    est = np.abs(m_f - m_c) / 3.0 + floor * scale
    hmin = float(np.min(np.diff(s)))
    est_d2 = np.abs(d2_f - d2_c) / 3.0 + 4 * floor * scale / hmin**2
    interior = slice(1, len(s) - 1)
    verdicts = [classify(m, e) for m, e in zip(m_f[interior], est[interior])]
    d2_ok = bool(np.all(d2_f[interior] <= 3 * est_d2[interior]))
    worst = int(np.argmin(m_f[interior] / est[interior])) + 1
    if "fail" in verdicts or not d2_ok:
        verdict = "fail"
    elif all(v == "pass" for v in verdicts):
        verdict = "pass"
    else:
        verdict = "inconclusive"
    table = [{"s": float(a), "value": float(b), "chord": float(c),
              "second_difference": (None if not np.isfinite(d) else float(d))}
             for a, b, c, d in zip(s, v_f, chord, d2_f)]
    params = {"n": n, "p": p, "phi": label, "refinement": ev.refinement, "s_points": len(s)}
    return InequalityReport(
        "bm_concavity_scan", params, v_f[worst] - m_f[worst], v_f[worst], float(m_f[worst]),
        float(est[worst]), verdict,
        {"scan_table": table, "chord_margin": _f(m_f), "chord_est": _f(est),
         "second_difference_ok": d2_ok, "point_verdicts": verdicts,
         "torsion": _f(vals[:, 0]), "torsion_coarse": _f(vals[:, 1])},
    )


def theorem_family_body(phi: FieldOnSphere, p: float, s: float) -> SupportFunction:
    """(1 + s phi)^{1/p} for p > 0, exp(s phi) for p = 0."""
    vals = np.exp(s * phi.values) if p == 0 else (1.0 + s * phi.values) ** (1.0 / p)
    return SupportFunction(phi.grid, vals, "even" if phi.is_even() else "none")


def local_theorem_scan(phi: FieldOnSphere, p: float, eps0: float, n_pairs: int = 11,
                       s_grid: Optional[Sequence[float]] = None, refinement: int = DEFAULT_REFINEMENT,
                       label: Optional[str] = None, evaluator: Optional[TorsionEvaluator] = None,
                       progress: Optional[Callable[[int, int], None]] = None) -> InequalityReport:
    """Concavity scans for every pair (s1, s2) of a uniform grid on [-eps0, eps0]."""
    if not 0 <= p < 1:
        raise ValueError("p must lie in [0, 1)")
    _require_even(phi, "phi")
    ev = evaluator if evaluator is not None else TorsionEvaluator(refinement)
    grid_s = np.linspace(-eps0, eps0, n_pairs)
    bodies = [theorem_family_body(phi, p, float(x)) for x in grid_s]
    for b in bodies:
        validate_in_S(b)
    counts = {"pass": 0, "fail": 0, "inconclusive": 0}
    worst = None
    pairs = []
    total = n_pairs * n_pairs
    for i, s1 in enumerate(grid_s):
        for j, s2 in enumerate(grid_s):
            rep = bm_concavity_scan(bodies[i], bodies[j], p, s_grid, evaluator=ev)
            counts[rep.verdict] += 1
            pairs.append({"s1": float(s1), "s2": float(s2), "margin": rep.margin,
                          "est_error": rep.est_error, "verdict": rep.verdict})
            if i != j and (worst is None or rep.margin / rep.est_error < worst.margin / worst.est_error):
                worst = rep
            if progress is not None:
                progress(i * n_pairs + j + 1, total)
    params = {"n": 2, "p": p, "phi": label, "eps0": eps0, "n_pairs": n_pairs,
              "refinement": ev.refinement}
    art = {"counts": counts, "pairs": pairs, "distinct_bodies": ev.solves}
    if worst is None:
        return InequalityReport("local_theorem_scan", params, 0.0, 0.0, 0.0, 0.0, "inconclusive", art)
    if counts["fail"]:
        verdict = "fail"
    else:
        verdict = worst.verdict
    art["worst_scan_table"] = worst.artifacts["scan_table"]
    return InequalityReport("local_theorem_scan", params, worst.lhs, worst.rhs, worst.margin,
                            worst.est_error, verdict, art)


# ---------------- Minkowski-type corollaries ----------------


def _torsion_pair(h: SupportFunction, refinement: int, cache: Optional[dict]):
    key = (TorsionEvaluator.key(h), refinement)
    if cache is not None and key in cache:
        return cache[key]
    g = validate_in_S(h)
    out = (g, solve_torsion(g, refinement).stripped(), solve_torsion(g, refinement - 1).stripped())
    if cache is not None:
        cache[key] = out
    return out


def _corollary_values(g1, s1, g2, s2, p: float) -> dict:
    n = g1.dim_n
    T1 = boundary_torsion(g1, s1.boundary_speed.values)
    T2 = boundary_torsion(g2, s2.boundary_speed.values)
    out = {"T1": T1, "T2": T2}
    if p > 0:
        Tp = mixed_torsion(g1, s1, g2.h, p)
        out["lp_lhs"] = ((n + 2 - p) * math.log(T1) + p * math.log(T2)) / (n + 2)
        out["lp_rhs"] = math.log(Tp)
        out["mixed"] = Tp
    dens = g2.h.values * s2.boundary_speed.values**2 * g2.surface_density / ((n + 2) * T2)
    out["log_rhs"] = float(np.dot(g2.grid.weights, np.log(g1.h.values / g2.h.values) * dens))
    out["log_lhs"] = math.log(T1 / T2) / (n + 2)
    return out


def minkowski_corollaries(h1: SupportFunction, h2: SupportFunction, p: float,
                          refinement: int = DEFAULT_REFINEMENT, label: Optional[str] = None,
                          floor: float = 1e-9, cache: Optional[dict] = None) -> list[InequalityReport]:
    """L_p-Minkowski (p > 0) and log-Minkowski inequalities for torsion, as log-scale reports.

    ``cache`` (any dict) memoizes the two solves per body across calls.
    """
    if h1.dim_n != 2:
        raise ValueError("corollaries need n = 2")
    g1, f1, c1 = _torsion_pair(h1, refinement, cache)
    g2, f2, c2 = _torsion_pair(h2, refinement, cache)
    fine = _corollary_values(g1, f1, g2, f2, p)
    coarse = _corollary_values(g1, c1, g2, c2, p)
    params = {"n": 2, "p": p, "phi": label, "refinement": refinement}
    out = []
    keys = (["lp"] if p > 0 else []) + ["log"]
    for k in keys:
        lhs, rhs = fine[f"{k}_lhs"], fine[f"{k}_rhs"]
        m_c = coarse[f"{k}_rhs"] - coarse[f"{k}_lhs"]
        est = abs((rhs - lhs) - m_c) / 3.0 + floor * max(abs(lhs), abs(rhs), 1.0)
        name = "lp_minkowski" if k == "lp" else "log_minkowski"
        out.append(_report(name, dict(params), lhs, rhs, est, {"values": fine}))
    return out
