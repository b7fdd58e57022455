"""Torsional rigidity, first Dirichlet eigenvalue and Newtonian capacity.

Planar bodies are solved with P1 elements; balls use closed forms. Every
solution carries the boundary speed |grad U|(F(xi)) on the sphere grid.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .body import BodyGeometry, SupportFunction
from .errors import ResonanceError, SolverError
from .extensions import (
    exterior_harmonic_extension,
    first_bessel_zero,
    helmholtz_ball_extension,
    interior_harmonic_extension,
)
from .fem import FEMSystem, Mesh2D, mesh_from_body
from .spherical import FieldOnSphere, analyze, evaluate_expansion, integrate, sphere_area

__all__ = [
    "FunctionalSolution",
    "MeasureOnSphere",
    "solve_torsion",
    "solve_eigen",
    "torsion_ball",
    "eigen_ball",
    "capacity_ball",
    "measure",
    "mixed_torsion",
    "linearized_trace",
    "boundary_torsion",
    "boundary_eigenvalue",
    "convergence_report",
    "is_ball",
]


@dataclass(frozen=True, eq=False)
class FunctionalSolution:
    kind: str
    value: float
    boundary_speed: FieldOnSphere
    est_error: float
    refinement: Optional[int]
    tag: str
    eigen_normalized: bool = False
    radius: Optional[float] = None
    extra: dict = field(default_factory=dict)
    context: Optional[object] = field(default=None, repr=False)

    def summary(self) -> dict:
        s = self.boundary_speed.values
        return {
            "kind": self.kind,
            "value": self.value,
            "est_error": self.est_error,
            "refinement": self.refinement,
            "tag": self.tag,
            "boundary_speed_stats": {
                "min": float(np.min(s)),
                "max": float(np.max(s)),
                "mean": float(integrate(self.boundary_speed) / sphere_area(self.boundary_speed.grid.dim_n)),
            },
        }

    def summary_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True)

    def stripped(self) -> "FunctionalSolution":
        """Copy without the (large) FEM context."""
        return FunctionalSolution(self.kind, self.value, self.boundary_speed, self.est_error,
                                  self.refinement, self.tag, self.eigen_normalized, self.radius,
                                  dict(self.extra), None)


@dataclass(frozen=True, eq=False)
class MeasureOnSphere:
    density: FieldOnSphere
    total: float


@dataclass(eq=False)
class _FEMContext:
    system: FEMSystem
    u: np.ndarray
    speed_fine: np.ndarray
    lam: float = 0.0


def is_ball(h: SupportFunction, tol: float = 1e-13) -> Optional[float]:
    v = h.values
    r = float(np.mean(v))
    return r if np.max(np.abs(v - r)) <= tol * r else None


def boundary_torsion(geom: BodyGeometry, speed: np.ndarray) -> float:
    n = geom.dim_n
    return float(np.dot(geom.grid.weights, speed**2 * geom.h.values * geom.surface_density)) / (n + 2)


def boundary_eigenvalue(geom: BodyGeometry, speed: np.ndarray) -> float:
    return 0.5 * float(np.dot(geom.grid.weights, speed**2 * geom.h.values * geom.surface_density))


def _band_limit(fine: np.ndarray, n_grid: int) -> np.ndarray:
    """Drop Fourier modes the sphere grid cannot resolve (removes mesh-scale ripple of the flux)."""
    c = np.fft.rfft(fine)
    c[n_grid // 2:] = 0.0
    return np.fft.irfft(c, len(fine))


def _speed_field(geom: BodyGeometry, values) -> FieldOnSphere:
    return FieldOnSphere(geom.grid, values, "none")


# ---------------- closed forms on balls ----------------


def torsion_ball(dim_n: int, radius: float, grid) -> FunctionalSolution:
    omega = sphere_area(dim_n) / dim_n
    val = omega / (dim_n * (dim_n + 2)) * radius ** (dim_n + 2)
    speed = np.full(grid.size, radius / dim_n)
    return FunctionalSolution("torsion", val, FieldOnSphere(grid, speed, "even"), 0.0, None,
                              "analytic", radius=radius)


def _unit_ball_eigen(dim_n: int) -> tuple[float, float]:
    """(lambda, |grad U| on the boundary) for the L2-normalized first eigenfunction."""
    if dim_n == 2:
        j = first_bessel_zero(0.0, 2.0, 3.0)
        return j * j, j / math.sqrt(math.pi)
    if dim_n == 3:
        return math.pi**2, math.sqrt(math.pi / 2.0)
    raise ValueError("dim_n must be 2 or 3")


def eigen_ball(dim_n: int, radius: float, grid) -> FunctionalSolution:
    lam, g = _unit_ball_eigen(dim_n)
    speed = np.full(grid.size, g / radius ** (1 + dim_n / 2.0))
    return FunctionalSolution("eigenvalue", lam / radius**2, FieldOnSphere(grid, speed, "even"), 0.0,
                              None, "analytic", eigen_normalized=True, radius=radius)


def capacity_ball(dim_n: int, radius: float = 1.0, grid=None) -> FunctionalSolution:
    """Newtonian (q=2) capacity of a ball: U = (radius/|X|)^{n-2}."""
    if dim_n < 3:
        raise ValueError("capacity needs n >= 3")
    if dim_n != 3:
        raise ValueError("only n = 3 spheres are implemented")
    from .spherical import build_grid

    if grid is None:
        grid = build_grid(3, 16)
    val = (dim_n - 2) * sphere_area(dim_n) * radius ** (dim_n - 2)
    speed = np.full(grid.size, (dim_n - 2) / radius)
    return FunctionalSolution("capacity_ball", val, FieldOnSphere(grid, speed, "even"), 0.0, None,
                              "analytic", radius=radius)


# ---------------- finite elements ----------------


def _check_planar(geom: BodyGeometry) -> None:
    if geom.dim_n != 2:
        raise ValueError("finite element solves need n = 2")


def solve_torsion(geom: BodyGeometry, refinement: int = 2, keep_context: bool = True) -> FunctionalSolution:
    """P1 solve of -Delta U = 1, U = 0 on the boundary."""
    _check_planar(geom)
    mesh = mesh_from_body(geom, refinement)
    sysm = FEMSystem(mesh)
    uI = sysm.solve_interior(sysm.load[sysm.interior])
    if not np.all(np.isfinite(uI)):
        raise SolverError("singular torsion system")
    u = sysm.full(uI)
    value = float(sysm.load @ u)
    res = sysm.K @ u - sysm.load
    speed_fine = _band_limit(-sysm.boundary_flux(res[sysm.bnd]), geom.grid.size)
    speed = speed_fine[:: mesh.grid_stride].copy()
    t_bdry = boundary_torsion(geom, speed)
    disc = abs(value - t_bdry)
    if disc > 0.05 * abs(value):
        raise SolverError(f"volume and boundary torsion disagree by {disc / value:.2e}")
    ctx = _FEMContext(sysm, u, speed_fine) if keep_context else None
    return FunctionalSolution(
        "torsion", value, _speed_field(geom, speed), disc, refinement, "fem",
        extra={"boundary_value": t_bdry, "n_triangles": mesh.n_triangles, "mesh_size": mesh.size},
        context=ctx,
    )


def solve_eigen(geom: BodyGeometry, refinement: int = 2, keep_context: bool = True,
                tol: float = 1e-13, max_iter: int = 500) -> FunctionalSolution:
    """Smallest Dirichlet eigenpair by inverse iteration; U >= 0, int U^2 = 1."""
    _check_planar(geom)
    mesh = mesh_from_body(geom, refinement)
    sysm = FEMSystem(mesh)
    M = sysm.M_II
    x = sysm.load[sysm.interior].copy()
    x /= math.sqrt(x @ (M @ x))
    lam_old = np.inf
    for it in range(max_iter):
        y = sysm.solve_interior(M @ x)
        y /= math.sqrt(y @ (M @ y))
        lam = float(y @ (sysm.K_II @ y))
        dx = min(np.max(np.abs(y - x)), np.max(np.abs(y + x)))
        x = y
        if abs(lam - lam_old) <= tol * lam and dx <= 1e-9 * np.max(np.abs(y)):
            break
        lam_old = lam
    else:
        raise SolverError("inverse iteration did not converge")
    if float(sysm.load[sysm.interior] @ x) < 0:
        x = -x
    u = sysm.full(x)
    res = sysm.K @ u - lam * (sysm.M @ u)
    speed_fine = _band_limit(-sysm.boundary_flux(res[sysm.bnd]), geom.grid.size)
    speed = speed_fine[:: mesh.grid_stride].copy()
    lam_b = boundary_eigenvalue(geom, speed)
    disc = abs(lam - lam_b)
    if disc > 0.05 * lam:
        raise SolverError(f"volume and boundary eigenvalue disagree by {disc / lam:.2e}")
    ctx = _FEMContext(sysm, u, speed_fine, lam) if keep_context else None
    return FunctionalSolution(
        "eigenvalue", lam, _speed_field(geom, speed), disc, refinement, "fem", eigen_normalized=True,
        extra={"boundary_value": lam_b, "iterations": it + 1, "n_triangles": mesh.n_triangles,
               "mesh_size": mesh.size, "min_interior_value": float(np.min(x))},
        context=ctx,
    )


def convergence_report(geom: BodyGeometry, kind: str = "torsion", levels=(1, 2, 3)) -> dict:
    """Values at three refinements, observed order and a Richardson estimate."""
    solver = solve_torsion if kind == "torsion" else solve_eigen
    vals = [solver(geom, r, keep_context=False).value for r in levels]
    d1, d2 = vals[1] - vals[0], vals[2] - vals[1]
    order = math.log2(abs(d1 / d2)) if d2 != 0 and d1 != 0 else float("nan")
    ratio = 2.0 ** order if np.isfinite(order) and order > 0 else 4.0
    extrap = vals[2] + d2 / (ratio - 1.0)
    return {"levels": list(levels), "values": vals, "observed_order": order,
            "richardson": extrap, "est_error": abs(extrap - vals[2])}


# ---------------- measures and mixed functionals ----------------


def measure(sol: FunctionalSolution, geom: BodyGeometry, variant: str = "base", p: Optional[float] = None,
            q: float = 2.0) -> MeasureOnSphere:
    """Density against d xi of mu (base), mu_p (lp) or the cone measure G (cone)."""
    speed = sol.boundary_speed.values
    power = q if sol.kind == "capacity_ball" else 2.0
    dens = speed**power * geom.surface_density
    h = geom.h.values
    n = geom.dim_n
    if variant == "base":
        pass
    elif variant == "lp":
        if p is None or p <= 0:
            raise ValueError("lp variant needs p > 0; the p = 0 case is the cone variant")
        dens = dens * h ** (1.0 - p)
    elif variant == "cone":
        if sol.kind == "torsion":
            c = 1.0 / (n + 2)
        elif sol.kind == "eigenvalue":
            c = 0.5
        else:
            c = (q - 1.0) / (n - q)
        dens = dens * h * c
    else:
        raise ValueError(f"unknown measure variant {variant!r}")
    f = FieldOnSphere(geom.grid, dens, "none")
    return MeasureOnSphere(f, integrate(f))


def mixed_torsion(geom: BodyGeometry, sol: FunctionalSolution, h1: SupportFunction, p: float) -> float:
    """T_p(Omega, Omega_1) = 1/(n+2) int h1^p h^{1-p} |grad U|^2 det Q."""
    if h1.grid is not geom.grid:
        raise ValueError("support functions live on different grids")
    n = geom.dim_n
    dens = h1.values**p * geom.h.values ** (1.0 - p) * sol.boundary_speed.values**2 * geom.surface_density
    return float(np.dot(geom.grid.weights, dens)) / (n + 2)


# ---------------- linearized problems ----------------


def _fine_values(f: FieldOnSphere, angles: np.ndarray) -> np.ndarray:
    e = analyze(f, f.grid.max_degree)
    return evaluate_expansion(e, angles)["Y"]


def linearized_trace(sol: FunctionalSolution, geom: BodyGeometry, boundary_data: FieldOnSphere,
                     return_info: bool = False):
    """grad U_dot . xi on the grid, where U_dot has Dirichlet data |grad U| * boundary_data.

    ``boundary_data`` plays the role of h' along a deformation.
    Torsion/capacity: U_dot harmonic. Eigenvalue: (Delta + lam) U_dot = -lam_dot U
    with int U U_dot = 0 (bordered solve); on the ball only zero-mean data is accepted.
    """
    grid = geom.grid
    if sol.tag == "analytic":
        r = sol.radius
        data = boundary_data.with_values(boundary_data.values * sol.boundary_speed.values, "none")
        if sol.kind == "torsion":
            ext = interior_harmonic_extension(data, grid.max_degree)
        elif sol.kind == "capacity_ball":
            ext = exterior_harmonic_extension(data, 3, grid.max_degree)
        else:
            lam = sol.value * r * r
            ext = helmholtz_ball_extension(data, lam, grid.max_degree)
        trace = ext.radial_derivative(grid).values / r
        info = {"extension": ext}
    else:
        ctx: _FEMContext = sol.context
        if ctx is None:
            raise ValueError("solution was stripped of its finite element context")
        sysm = ctx.system
        mesh = sysm.mesh
        g = _fine_values(boundary_data, mesh.boundary_angles) * ctx.speed_fine
        info = {}
        if sol.kind == "torsion":
            xI = sysm.solve_interior(-(sysm.K_IB @ g))
            v = sysm.full(xI, g)
            res = (sysm.K @ v)[sysm.bnd]
        elif sol.kind == "eigenvalue":
            lam = ctx.lam
            uI = ctx.u[sysm.interior]
            A_II = (sysm.K_II - lam * sysm.M_II).tocsc()
            A_IB = sysm.K_IB - lam * sysm.M_IB
            m = sysm.M_II @ uI
            nI = len(uI)
            border = sp.bmat([[A_II, sp.csc_matrix(-m[:, None])],
                              [sp.csc_matrix(m[None, :]), None]], format="csc")
            rhs = np.concatenate([-(A_IB @ g), [-(uI @ (sysm.M_IB @ g))]])
            z = spla.splu(border).solve(rhs)
            xI, lam_dot = z[:nI], float(z[nI])
            v = sysm.full(xI, g)
            res = (sysm.K @ v - lam * (sysm.M @ v) - lam_dot * (sysm.M @ ctx.u))[sysm.bnd]
            info["lam_dot"] = lam_dot
        else:
            raise ValueError(f"no linearized problem for {sol.kind}")
        flux = _band_limit(sysm.boundary_flux(res), grid.size)
        trace = flux[:: mesh.grid_stride].copy()
    out = FieldOnSphere(grid, trace, "none")
    return (out, info) if return_info else out


__all__ += ["ResonanceError"]
