"""Harmonic and Helmholtz extensions of sphere data into (or out of) the unit ball."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import IllConditionedModeError, ResonanceError
from .spherical import FieldOnSphere, HarmonicExpansion, analyze, synthesize

__all__ = [
    "BallExtension",
    "interior_harmonic_extension",
    "exterior_harmonic_extension",
    "helmholtz_ball_extension",
    "radial_helmholtz",
    "bessel_series",
    "first_bessel_zero",
    "RadialSolve",
]

SWITCH_RADIUS = 0.1
RK4_STEP = 1e-3


@dataclass(frozen=True, eq=False)
class BallExtension:
    """U = sum_k c_k R_k(r) Y_k with R_k(1) = 1.

    ``slopes[k]`` is R_k'(1), so the radial derivative on the unit sphere is
    sum_k slopes[k] c_k Y_k.
    """

    kind: str
    dim_n: int
    boundary: HarmonicExpansion
    slopes: np.ndarray
    lam: float = 0.0
    ode_residual: float = 0.0

    def radial_derivative(self, grid) -> FieldOnSphere:
        return synthesize(self.boundary.scaled(self.slopes), grid)

    def radial_derivative_expansion(self) -> HarmonicExpansion:
        return self.boundary.scaled(self.slopes)

    def energy(self) -> float:
        """Dirichlet energy over the ball (interior) or its complement (exterior)."""
        c2 = self.boundary.coeffs**2
        if self.kind == "interior":
            return float(np.sum(self.slopes * c2))
        if self.kind == "exterior":
            return float(np.sum(-self.slopes * c2))
        raise ValueError("energy is only defined for harmonic extensions")

    def radial_factor(self, r) -> np.ndarray:
        """R_k(r) for every coefficient, shape (len(r), modes)."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        l = self.boundary.degrees.astype(float)
        if self.kind == "interior":
            return r[:, None] ** l[None, :]
        if self.kind == "exterior":
            return r[:, None] ** (-(l + self.dim_n - 2))[None, :]
        out = np.empty((len(r), len(l)))
        for deg in np.unique(self.boundary.degrees):
            sol = radial_helmholtz(int(deg), self.dim_n, self.lam)
            out[:, self.boundary.degrees == deg] = (sol.series(r)[0] / sol.w1)[:, None]
        return out


def interior_harmonic_extension(data: FieldOnSphere, L: Optional[int] = None) -> BallExtension:
    e = analyze(data, L)
    return BallExtension("interior", e.dim_n, e, e.degrees.astype(float))


def exterior_harmonic_extension(data: FieldOnSphere, dim_n: int = 3, L: Optional[int] = None) -> BallExtension:
    if dim_n != 3 or data.grid.dim_n != 3:
        raise ValueError("exterior extension needs n = 3 (capacity requires n > 2)")
    e = analyze(data, L)
    return BallExtension("exterior", 3, e, -(e.degrees + dim_n - 2).astype(float))


def bessel_series(nu: float, x, terms: int = 60) -> np.ndarray:
    """Power series of J_nu(x) for real x >= 0 (entire in x; fine for x <~ 20)."""
    x = np.asarray(x, dtype=float)
    half = 0.5 * x
    term = half**nu / math.gamma(nu + 1.0)
    total = np.array(term, dtype=float)
    for k in range(1, terms):
        term = -term * half * half / (k * (k + nu))
        total = total + term
    return total


def first_bessel_zero(nu: float, lo: float, hi: float, tol: float = 1e-15) -> float:
    """First zero of J_nu in [lo, hi] by bisection on the power series."""
    flo = float(bessel_series(nu, lo))
    fhi = float(bessel_series(nu, hi))
    if flo * fhi > 0:
        raise ValueError("bracket does not contain a sign change")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = float(bessel_series(nu, mid))
        if fm == 0.0:
            return mid
        if fm * flo < 0:
            hi = mid
        else:
            lo, flo = mid, fm
        if hi - lo < tol * hi:
            break
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class RadialSolve:
    """Regular solution of w'' + (n-1)/r w' + (lam - l(l+n-2)/r^2) w = 0 with w ~ r^l."""

    l: int
    dim_n: int
    lam: float
    w1: float
    dw1: float
    residual: float
    coeffs: tuple

    def series(self, r):
        r = np.asarray(r, dtype=float)
        w = np.zeros_like(r)
        dw = np.zeros_like(r)
        d2w = np.zeros_like(r)
        for k, c in enumerate(self.coeffs):
            e = self.l + 2 * k
            w = w + c * r**e
            if e >= 1:
                dw = dw + c * e * r ** (e - 1)
            if e >= 2:
                d2w = d2w + c * e * (e - 1) * r ** (e - 2)
        return w, dw, d2w


def _series_coeffs(l: int, dim_n: int, lam: float, tol: float = 1e-18) -> list:
    c = [1.0]
    k = 0
    while True:
        k += 1
        c.append(-lam * c[-1] / (2.0 * k * (2 * l + 2 * k + dim_n - 2)))
        if abs(c[-1]) < tol * abs(c[0]) and k > 4:
            break
        if k > 200:
            break
    return c


def radial_helmholtz(l: int, dim_n: int, lam: float) -> RadialSolve:
    """Series up to r=0.1, RK4 (step 1e-3) from there to r=1.

    RK4 integrates the regular factor v = w / r^l, which satisfies
    v'' + (2l+n-1)/r v' + lam v = 0, so the r^l growth is carried exactly.
    ``w1``/``dw1`` come from the RK4 march. ``residual`` is the larger of the
    series' ODE residual on [0.1, 1] and the RK4-vs-series mismatch at r=1,
    both relative to max|w|.
    """
    coeffs = _series_coeffs(l, dim_n, lam)
    sol = RadialSolve(l, dim_n, lam, 0.0, 0.0, 0.0, tuple(coeffs))
    q = l * (l + dim_n - 2)
    b = 2 * l + dim_n - 1

    def rhs(r, y):
        return np.array([y[1], -b / r * y[1] - lam * y[0]])

    r0 = SWITCH_RADIUS
    w0, dw0, _ = sol.series(np.array(r0))
    v0 = float(w0) / r0**l
    dv0 = (float(dw0) - l * r0 ** (l - 1) * v0) / r0**l if l else float(dw0)
    y = np.array([v0, dv0])
    nsteps = int(round((1.0 - r0) / RK4_STEP))
    h = (1.0 - r0) / nsteps
    for i in range(nsteps):
        r = r0 + i * h
        k1 = rhs(r, y)
        k2 = rhs(r + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(r + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(r + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    w1, dw1 = y[0], y[1] + l * y[0]
    rr = np.linspace(r0, 1.0, 91)
    w, dw, d2w = sol.series(rr)
    scale = max(np.max(np.abs(w)), 1e-300)
    ode = np.max(np.abs(d2w + (dim_n - 1) / rr * dw + (lam - q / rr**2) * w)) / scale
    ws1, dws1, _ = sol.series(np.array(1.0))
    mismatch = max(abs(w1 - ws1), abs(dw1 - dws1)) / scale
    return RadialSolve(l, dim_n, lam, float(w1), float(dw1), float(max(ode, mismatch)), tuple(coeffs))


def helmholtz_ball_extension(data: FieldOnSphere, lam: float, L: Optional[int] = None,
                             mean_tol: float = 1e-12) -> BallExtension:
    """Solve Delta U + lam U = 0 in B^n with U = data on S^{n-1}, degree by degree."""
    e = analyze(data, L)
    scale = max(1.0, float(np.max(np.abs(e.coeffs))))
    if abs(e.coeffs[0]) > mean_tol * scale:
        raise ResonanceError("degree-0 data is resonant at the first Dirichlet eigenvalue")
    slopes = np.zeros_like(e.coeffs)
    resid = 0.0
    for deg in np.unique(e.degrees):
        mask = e.degrees == deg
        if deg == 0 or not np.any(np.abs(e.coeffs[mask]) > mean_tol * scale):
            continue
        sol = radial_helmholtz(int(deg), e.dim_n, lam)
        if abs(sol.w1) < 1e-10:
            raise IllConditionedModeError(f"radial factor vanishes at r=1 for degree {deg}")
        slopes[mask] = sol.dw1 / sol.w1
        resid = max(resid, sol.residual)
    return BallExtension("helmholtz", e.dim_n, e, slopes, lam=lam, ode_residual=resid)
