"""First and second variations of torsion, eigenvalue and capacity along L_p and log families.

Closed-form expressions are evaluated on the sphere grid and compared with
central finite differences of the functional along the same family.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .body import BodyFamily, BodyGeometry, SupportFunction, family_at, field_gradient, validate_in_S
from .functionals import (
    FunctionalSolution,
    capacity_ball,
    eigen_ball,
    is_ball,
    linearized_trace,
    solve_eigen,
    solve_torsion,
    torsion_ball,
)
from .spherical import FieldOnSphere, build_grid
from .extensions import exterior_harmonic_extension

__all__ = [
    "VariationReport",
    "finite_differences",
    "torsion_variation_lp",
    "torsion_variation_log",
    "eigen_variation_lp",
    "capacity_variation_ball",
    "capacity_bilinear_form",
    "second_variation_terms",
    "CSV_COLUMNS",
]

FD_STEP = 1e-3
GAP_FLOOR = 1e-8
DEFAULT_REFINEMENT = 3

CSV_COLUMNS = ["functional", "mode", "p", "phi", "formula_first", "fd_first", "gap_first",
               "formula_second", "fd_second", "gap_second", "fd_step"]


def _gap(a: float, b: Optional[float]) -> Optional[float]:
    if b is None:
        return None
    return abs(a - b) / max(abs(b), GAP_FLOOR)


@dataclass
class VariationReport:
    functional: str
    mode: str
    p: Optional[float]
    phi: str
    formula_first: float
    formula_second: float
    fd_first: Optional[float]
    fd_second: Optional[float]
    fd_step: float
    terms: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def gap_first(self) -> Optional[float]:
        return _gap(self.formula_first, self.fd_first)

    @property
    def gap_second(self) -> Optional[float]:
        return _gap(self.formula_second, self.fd_second)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gap_first"] = self.gap_first
        d["gap_second"] = self.gap_second
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def csv_row(self) -> dict:
        d = self.to_dict()
        return {k: d[k] for k in CSV_COLUMNS}

    @staticmethod
    def csv_table(reports) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in reports:
            w.writerow(r.csv_row())
        return buf.getvalue()


def finite_differences(g: Callable[[float], float], step: float = FD_STEP) -> tuple[float, float]:
    """Central first/second differences at 0 with one Richardson level (5 evaluations)."""
    g0 = g(0.0)
    gp, gm = g(step), g(-step)
    gp2, gm2 = g(2 * step), g(-2 * step)
    d1 = (gp - gm) / (2 * step)
    d1b = (gp2 - gm2) / (4 * step)
    d2 = (gp - 2 * g0 + gm) / step**2
    d2b = (gp2 - 2 * g0 + gm2) / (4 * step**2)
    return (4 * d1 - d1b) / 3.0, (4 * d2 - d2b) / 3.0


def _integrate(geom: BodyGeometry, values: np.ndarray) -> float:
    return float(np.dot(geom.grid.weights, values))


def second_variation_terms(geom: BodyGeometry, sol: FunctionalSolution, d1: np.ndarray,
                           d2: np.ndarray) -> dict:
    """Integrals entering the second variation for a deformation with h' = d1, h'' = d2."""
    s = sol.boundary_speed.values
    det = geom.surface_density
    f1 = geom.field(d1)
    trace, info = linearized_trace(sol, geom, f1, return_info=True)
    grad = field_gradient(f1)
    out = {
        "first": _integrate(geom, d1 * s**2 * det),
        "h2": _integrate(geom, d2 * s**2 * det),
        "udot": _integrate(geom, d1 * s * det * trace.values),
        "trace_cofactor": _integrate(geom, geom.trace_cofactor * s**2 * d1**2),
        "speed_linear": _integrate(geom, d1**2 * s * det),
        "gradient": _integrate(geom, s**2 * geom.quadratic_form(grad)),
    }
    if "lam_dot" in info:
        out["lam_dot"] = info["lam_dot"]
    return out


def _describe(direction: FieldOnSphere, label: Optional[str]) -> str:
    if label is not None:
        return label
    v = direction.values
    return f"samples(min={float(np.min(v))!r},max={float(np.max(v))!r})"


def _fd_solver(kind: str, refinement: int):
    if kind == "torsion":
        return lambda g: solve_torsion(g, refinement, keep_context=False).value
    return lambda g: solve_eigen(g, refinement, keep_context=False).value


def _fd_along(fam: BodyFamily, kind: str, refinement: int, step: float) -> tuple[float, float]:
    solve = _fd_solver(kind, refinement)

    def g(t: float) -> float:
        return solve(validate_in_S(family_at(fam, t)))

    return finite_differences(g, step)


def _refinement(sol: FunctionalSolution, refinement: Optional[int]) -> int:
    if refinement is not None:
        return refinement
    return sol.refinement if sol.refinement is not None else DEFAULT_REFINEMENT


def _torsion_report(geom, sol, fam: BodyFamily, label, fd: bool, refinement, step) -> VariationReport:
    if sol.kind != "torsion":
        raise ValueError("torsion variation needs a torsion solution")
    d1, d2 = fam.derivatives()
    t = second_variation_terms(geom, sol, d1, d2)
    first = t["first"]
    second = t["h2"] - 2 * t["udot"] - t["trace_cofactor"] + 2 * t["speed_linear"] - t["gradient"]
    fd1 = fd2 = None
    if fd and np.any(fam.direction.values):
        fd1, fd2 = _fd_along(fam, "torsion", _refinement(sol, refinement), step)
    elif fd:
        fd1 = fd2 = 0.0
    return VariationReport("torsion", fam.mode, fam.p, _describe(fam.direction, label), first, second,
                           fd1, fd2, step, t)


def torsion_variation_lp(geom: BodyGeometry, sol: FunctionalSolution, phi_p: FieldOnSphere, p: float,
                         label: Optional[str] = None, fd: bool = True, refinement: Optional[int] = None,
                         step: float = FD_STEP) -> VariationReport:
    """Variations of t -> T((h^p + t phi_p)^{1/p}); ``phi_p`` is phi^p."""
    fam = BodyFamily("lp", geom.h, phi_p, p, 2 * step)
    return _torsion_report(geom, sol, fam, label, fd, refinement, step)


def torsion_variation_log(geom: BodyGeometry, sol: FunctionalSolution, log_phi: FieldOnSphere,
                          label: Optional[str] = None, fd: bool = True, refinement: Optional[int] = None,
                          step: float = FD_STEP) -> VariationReport:
    """Variations of t -> T(h exp(t log_phi)); ``log_phi`` is log of the positive multiplier."""
    fam = BodyFamily("log", geom.h, log_phi, None, 2 * step)
    return _torsion_report(geom, sol, fam, label, fd, refinement, step)


def eigen_variation_lp(geom: BodyGeometry, sol: FunctionalSolution, phi_p: FieldOnSphere, p: float,
                       label: Optional[str] = None, fd: bool = True, refinement: Optional[int] = None,
                       step: float = FD_STEP) -> VariationReport:
    """Variations of t -> lambda((h^p + t phi_p)^{1/p})."""
    if sol.kind != "eigenvalue":
        raise ValueError("eigenvalue variation needs an eigenvalue solution")
    fam = BodyFamily("lp", geom.h, phi_p, p, 2 * step)
    d1, d2 = fam.derivatives()
    t = second_variation_terms(geom, sol, d1, d2)
    # the term carrying lambda U on the boundary vanishes identically (U = 0 there)
    t["u_boundary"] = 0.0
    first = -t["first"]
    second = -t["h2"] + 2 * t["udot"] + t["trace_cofactor"] + t["gradient"] + t["u_boundary"]
    fd1 = fd2 = None
    if fd and np.any(phi_p.values):
        fd1, fd2 = _fd_along(fam, "eigenvalue", _refinement(sol, refinement), step)
    elif fd:
        fd1 = fd2 = 0.0
    notes = ["boundary term with lambda*U is zero because U vanishes on the boundary"]
    return VariationReport("eigenvalue", "lp", p, _describe(phi_p, label), first, second, fd1, fd2,
                           step, t, notes)


def capacity_bilinear_form(f1: FieldOnSphere, f2: FieldOnSphere) -> float:
    """int h'_1 |grad U| grad U_dot_2 . xi on the unit ball of R^3 (|grad U| = 1)."""
    ext = exterior_harmonic_extension(f2, 3, f2.grid.max_degree)
    return float(np.dot(f1.grid.weights, f1.values * ext.radial_derivative(f1.grid).values))


def capacity_variation_ball(phi_p: FieldOnSphere, p: float, dim_n: int = 3, q: float = 2.0,
                            label: Optional[str] = None, step: float = FD_STEP) -> VariationReport:
    """Variations of Newtonian capacity along (1 + t phi_p)^{1/p} at the unit ball of R^3.

    The finite-difference oracle is only available for constant ``phi_p``
    (perturbed bodies are balls); otherwise fd fields stay None.
    """
    if dim_n != 3 or q != 2.0:
        raise ValueError("capacity variations are implemented for n = 3, q = 2 only")
    grid = phi_p.grid
    h = SupportFunction(grid, np.ones(grid.size))
    geom = validate_in_S(h)
    sol = capacity_ball(3, 1.0, grid)
    s = sol.boundary_speed.values
    det = geom.surface_density
    f = phi_p.values
    d1 = f / p
    d2 = (1.0 - p) / (p * p) * f * f
    ext = exterior_harmonic_extension(geom.field(d1 * s), 3, grid.max_degree)
    trace = ext.radial_derivative(grid).values
    grad = field_gradient(geom.field(d1))
    t = {
        "first": _integrate(geom, d1 * s**q * det),
        "h2": _integrate(geom, d2 * s**q * det),
        "udot": _integrate(geom, d1 * s * det * trace),
        "trace_cofactor": _integrate(geom, geom.trace_cofactor * s**q * d1**2),
        "gradient": _integrate(geom, s**q * geom.quadratic_form(grad)),
    }
    first = (q - 1.0) * t["first"]
    second = (q - 1.0) * (t["h2"] - 2 * t["udot"] - t["trace_cofactor"] - t["gradient"])
    fd1 = fd2 = None
    notes = []
    if np.ptp(f) == 0.0:
        c0 = float(f[0])
        area_c = capacity_ball(3, 1.0, grid).value

        def g(tt: float) -> float:
            return area_c * (1.0 + tt * c0) ** (1.0 / p)

        fd1, fd2 = finite_differences(g, step)
    else:
        notes.append("non-radial direction: checked by Green identity and symmetry only")
    return VariationReport("capacity", "lp", p, _describe(phi_p, label), first, second, fd1, fd2, step,
                           t, notes)


def base_solution(geom: BodyGeometry, kind: str, refinement: int = DEFAULT_REFINEMENT) -> FunctionalSolution:
    """Analytic solution on balls, finite elements otherwise."""
    r = is_ball(geom.h)
    if r is not None:
        return (torsion_ball if kind == "torsion" else eigen_ball)(geom.dim_n, r, geom.grid)
    return (solve_torsion if kind == "torsion" else solve_eigen)(geom, refinement)


__all__ += ["base_solution"]
