"""Quadrature, real harmonic transforms and spectral calculus on S^1 and S^2.

Grids
-----
n=2: ``resolution`` equally spaced angles with weights 2*pi/N. Exact for
trigonometric polynomials of degree <= N-1.

n=3: Gauss-Legendre in cos(colatitude) with ``resolution`` nodes times
``2*resolution`` uniform longitudes. Exact for spherical polynomials of
degree <= 2*resolution-1. No node sits on a pole, so the (theta, phi)
frame is regular at every node.

Basis
-----
Real, orthonormal in L^2(dH^{n-1}), ordered by degree then order index.
n=2: 1/sqrt(2pi), then cos(l t)/sqrt(pi), sin(l t)/sqrt(pi) for l >= 1
(order index 0 = cos, 1 = sin).
n=3: Y_lm for m = -l..l; m < 0 carries sin(|m| phi), m > 0 cos(m phi).
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import ParityError, ResolutionError

__all__ = [
    "SphereGrid",
    "FieldOnSphere",
    "HarmonicExpansion",
    "build_grid",
    "integrate",
    "analyze",
    "synthesize",
    "even_projection",
    "spherical_gradient_sq",
    "sphere_gradient",
    "mode_table",
    "n_modes",
    "basis_at",
    "evaluate_expansion",
    "amplitude_scale",
    "sphere_area",
    "DEFAULT_BAND_LIMIT",
]

DEFAULT_BAND_LIMIT = 16


def sphere_area(dim_n: int) -> float:
    """|S^{n-1}|."""
    if dim_n == 2:
        return 2.0 * math.pi
    if dim_n == 3:
        return 4.0 * math.pi
    raise ValueError(f"dim_n must be 2 or 3, got {dim_n}")


@dataclass(frozen=True, eq=False)
class SphereGrid:
    dim_n: int
    resolution: int
    nodes: np.ndarray
    weights: np.ndarray
    exactness: int
    theta: np.ndarray
    phi: Optional[np.ndarray]
    antipode: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def max_degree(self) -> int:
        return self.exactness // 2

    def derivative_tables(self, L: int) -> dict:
        """Basis values and angular derivatives at the nodes (cached)."""
        with self._lock:
            tab = self._cache.get(L)
            if tab is None:
                tab = basis_at(self.dim_n, L, self.theta, self.phi, derivatives=2)
                for a in tab.values():
                    a.setflags(write=False)
                self._cache[L] = tab
        return tab


@lru_cache(maxsize=None)
def build_grid(dim_n: int, resolution: int) -> SphereGrid:
    """Quadrature grid on S^{n-1}; identical arguments return the same object."""
    if dim_n not in (2, 3):
        raise ValueError(f"dim_n must be 2 or 3, got {dim_n}")
    if resolution < 8:
        raise ValueError(f"resolution must be >= 8, got {resolution}")
    if dim_n == 2:
        if resolution % 2:
            raise ValueError("n=2 grids need an even node count for antipodal symmetry")
        N = resolution
        theta = 2.0 * np.pi * np.arange(N) / N
        nodes = np.column_stack([np.cos(theta), np.sin(theta)])
        weights = np.full(N, 2.0 * np.pi / N)
        antipode = (np.arange(N) + N // 2) % N
        grid = SphereGrid(2, resolution, nodes, weights, N - 1, theta, None, antipode)
    else:
        nt, nphi = resolution, 2 * resolution
        x, wx = np.polynomial.legendre.leggauss(nt)
        # colatitude ascending: x = cos(theta) descending
        x, wx = x[::-1], wx[::-1]
        th = np.arccos(x)
        ph = 2.0 * np.pi * np.arange(nphi) / nphi
        TH, PH = np.meshgrid(th, ph, indexing="ij")
        W = np.outer(wx, np.full(nphi, 2.0 * np.pi / nphi))
        theta = TH.ravel()
        phi = PH.ravel()
        st = np.sin(theta)
        nodes = np.column_stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)])
        it, ip = np.meshgrid(np.arange(nt), np.arange(nphi), indexing="ij")
        anti = ((nt - 1 - it) * nphi + (ip + nphi // 2) % nphi).ravel()
        grid = SphereGrid(3, resolution, nodes, W.ravel(), 2 * nt - 1, theta, phi, anti)
    for a in (grid.nodes, grid.weights, grid.theta, grid.antipode):
        a.setflags(write=False)
    if grid.phi is not None:
        grid.phi.setflags(write=False)
    return grid


def n_modes(dim_n: int, L: int) -> int:
    return 2 * L + 1 if dim_n == 2 else (L + 1) ** 2


@lru_cache(maxsize=None)
def mode_table(dim_n: int, L: int) -> tuple[np.ndarray, np.ndarray]:
    """(degree, order index) of each basis column."""
    ls, ms = [], []
    if dim_n == 2:
        ls.append(0)
        ms.append(0)
        for l in range(1, L + 1):
            ls += [l, l]
            ms += [0, 1]
    else:
        for l in range(L + 1):
            for m in range(-l, l + 1):
                ls.append(l)
                ms.append(m)
    out = np.array(ls), np.array(ms)
    for a in out:
        a.setflags(write=False)
    return out


def amplitude_scale(dim_n: int, l: int) -> float:
    """Orthonormal coefficient per unit amplitude of the user-facing harmonic.

    The user-facing harmonics are 1, cos(l t), sin(l t) on S^1 and
    sqrt(4pi/(2l+1)) Y_lm on S^2 (so m=0 is P_l(cos theta)).
    """
    if dim_n == 2:
        return math.sqrt(2.0 * math.pi) if l == 0 else math.sqrt(math.pi)
    return math.sqrt(4.0 * math.pi / (2 * l + 1))


def _legendre_table(L: int, x: np.ndarray, s: np.ndarray):
    """Orthonormal associated Legendre functions Pbar[l][m] (no Condon-Shortley)
    and d/dtheta, with x = cos(theta), s = sin(theta)."""
    P = {}
    P[(0, 0)] = np.full_like(x, math.sqrt(1.0 / (4.0 * math.pi)))
    for m in range(1, L + 1):
        P[(m, m)] = math.sqrt((2 * m + 1) / (2.0 * m)) * s * P[(m - 1, m - 1)]
    for m in range(0, L):
        P[(m + 1, m)] = math.sqrt(2 * m + 3.0) * x * P[(m, m)]
    for m in range(0, L + 1):
        for l in range(m + 2, L + 1):
            a = math.sqrt((4.0 * l * l - 1) / (l * l - m * m))
            b = math.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1) ** 2 - 1))
            P[(l, m)] = a * (x * P[(l - 1, m)] - b * P[(l - 2, m)])
    dP = {}
    for (l, m), v in P.items():
        # (x^2-1) dP/dx = l x P_l^m - (l+m) P_{l-1}^m  (unnormalized)
        lower = 0.0
        if l - 1 >= m:
            f = math.sqrt((2 * l + 1.0) / (2 * l - 1.0) * (l - m) * (l + m))
            lower = f * P[(l - 1, m)]
        dP[(l, m)] = (l * x * v - lower) / s
    return P, dP


def basis_at(dim_n: int, L: int, theta, phi=None, derivatives: int = 0) -> dict:
    """Orthonormal basis (and angular derivatives) at arbitrary points.

    Keys: ``Y``; with derivatives >= 1: ``t`` (n=2) or ``th``, ``ph``;
    with derivatives >= 2: ``tt`` (n=2) or ``thth``, ``thph``, ``phph``.
    Each array has shape (points, modes).
    """
    theta = np.asarray(theta, dtype=float)
    if dim_n == 2:
        ls, ms = mode_table(2, L)
        lf = ls.astype(float)
        arg = np.outer(theta, lf)
        c, s = np.cos(arg), np.sin(arg)
        norm = np.where(ls == 0, 1.0 / math.sqrt(2 * math.pi), 1.0 / math.sqrt(math.pi))
        cos_col = ms == 0
        Y = np.where(cos_col, c, s) * norm
        out = {"Y": Y}
        if derivatives >= 1:
            out["t"] = np.where(cos_col, -s, c) * lf * norm
        if derivatives >= 2:
            out["tt"] = -(lf**2) * Y
        return out
    if dim_n != 3:
        raise ValueError(f"dim_n must be 2 or 3, got {dim_n}")
    phi = np.asarray(phi, dtype=float)
    x, s = np.cos(theta), np.sin(theta)
    if derivatives >= 1 and np.any(np.abs(s) < 1e-14):
        raise ValueError("angular derivatives are singular at the poles")
    s_safe = np.where(np.abs(s) < 1e-300, 1e-300, s)
    P, dP = _legendre_table(L, x, s_safe)
    nm = n_modes(3, L)
    Y = np.empty((len(theta), nm))
    Yt = np.empty_like(Y)
    Yp = np.empty_like(Y)
    Ytt = np.empty_like(Y)
    Ytp = np.empty_like(Y)
    Ypp = np.empty_like(Y)
    cot = x / s_safe
    k = 0
    for l in range(L + 1):
        for m in range(-l, l + 1):
            am = abs(m)
            if m == 0:
                ang, dang = np.ones_like(phi), np.zeros_like(phi)
            elif m > 0:
                ang, dang = math.sqrt(2) * np.cos(m * phi), -math.sqrt(2) * m * np.sin(m * phi)
            else:
                ang, dang = math.sqrt(2) * np.sin(am * phi), math.sqrt(2) * am * np.cos(am * phi)
            p, dp = P[(l, am)], dP[(l, am)]
            Y[:, k] = p * ang
            if derivatives >= 1:
                Yt[:, k] = dp * ang
                Yp[:, k] = p * dang
            if derivatives >= 2:
                # Legendre ODE in theta
                d2p = -cot * dp - (l * (l + 1) - am * am / s_safe**2) * p
                Ytt[:, k] = d2p * ang
                Ytp[:, k] = dp * dang
                Ypp[:, k] = -(am * am) * p * ang
            k += 1
    out = {"Y": Y}
    if derivatives >= 1:
        out["th"], out["ph"] = Yt, Yp
    if derivatives >= 2:
        out["thth"], out["thph"], out["phph"] = Ytt, Ytp, Ypp
    return out


@dataclass(frozen=True, eq=False)
class HarmonicExpansion:
    dim_n: int
    max_degree: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape != (n_modes(self.dim_n, self.max_degree),):
            raise ValueError("coefficient vector has the wrong length")
        object.__setattr__(self, "coeffs", c)

    @property
    def degrees(self) -> np.ndarray:
        return mode_table(self.dim_n, self.max_degree)[0]

    @property
    def orders(self) -> np.ndarray:
        return mode_table(self.dim_n, self.max_degree)[1]

    def laplacian_eigenvalues(self) -> np.ndarray:
        """l(l+n-2) per coefficient, the spectrum of -Delta_S."""
        l = self.degrees
        return l * (l + self.dim_n - 2)

    def scaled(self, factors) -> "HarmonicExpansion":
        return HarmonicExpansion(self.dim_n, self.max_degree, self.coeffs * factors)

    def mean_coefficient(self) -> float:
        return float(self.coeffs[0])


@dataclass(frozen=True, eq=False)
class FieldOnSphere:
    grid: SphereGrid
    values: np.ndarray
    parity: str = "none"

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.size,):
            raise ValueError(f"expected {self.grid.size} samples, got {v.shape}")
        if self.parity not in ("even", "none"):
            raise ValueError(f"parity must be 'even' or 'none', got {self.parity!r}")
        if self.parity == "even":
            scale = max(1.0, float(np.max(np.abs(v))))
            if np.max(np.abs(v - v[self.grid.antipode])) > 1e-12 * scale:
                raise ParityError("field declared even but differs at antipodal nodes")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def with_values(self, values, parity: Optional[str] = None) -> "FieldOnSphere":
        return FieldOnSphere(self.grid, values, self.parity if parity is None else parity)

    def is_even(self, tol: float = 1e-12) -> bool:
        v = self.values
        return bool(np.max(np.abs(v - v[self.grid.antipode])) <= tol * max(1.0, np.max(np.abs(v))))


def integrate(f: FieldOnSphere) -> float:
    """Quadrature sum of w_i f_i."""
    return float(np.dot(f.grid.weights, f.values))


def _check_L(grid: SphereGrid, L: Optional[int]) -> int:
    if L is None:
        return min(DEFAULT_BAND_LIMIT, grid.max_degree)
    if L < 0 or 2 * L > grid.exactness:
        raise ResolutionError(
            f"band limit {L} needs exactness {2 * L}, grid has {grid.exactness}"
        )
    return L


def analyze(f: FieldOnSphere, L: Optional[int] = None) -> HarmonicExpansion:
    L = _check_L(f.grid, L)
    Y = f.grid.derivative_tables(L)["Y"]
    coeffs = Y.T @ (f.grid.weights * f.values)
    return HarmonicExpansion(f.grid.dim_n, L, coeffs)


def synthesize(e: HarmonicExpansion, grid: SphereGrid, parity: str = "none") -> FieldOnSphere:
    if grid.dim_n != e.dim_n:
        raise ValueError("expansion and grid dimensions differ")
    _check_L(grid, e.max_degree)
    Y = grid.derivative_tables(e.max_degree)["Y"]
    vals = Y @ e.coeffs
    if parity == "even":
        vals = 0.5 * (vals + vals[grid.antipode])
    return FieldOnSphere(grid, vals, parity)


def evaluate_expansion(e: HarmonicExpansion, theta, phi=None, derivatives: int = 0) -> dict:
    """Values (and derivatives) of an expansion at arbitrary points."""
    tab = basis_at(e.dim_n, e.max_degree, theta, phi, derivatives)
    return {k: v @ e.coeffs for k, v in tab.items()}


def even_projection(e: HarmonicExpansion) -> HarmonicExpansion:
    """Drop odd-degree content."""
    return e.scaled((e.degrees % 2 == 0).astype(float))


def spherical_gradient_sq(f: FieldOnSphere, L: Optional[int] = None) -> float:
    """Spectral Dirichlet energy, sum of l(l+n-2) c^2."""
    e = analyze(f, L)
    return float(np.sum(e.laplacian_eigenvalues() * e.coeffs**2))


def sphere_gradient(f: FieldOnSphere, L: Optional[int] = None) -> np.ndarray:
    """Tangential gradient in the orthonormal frame, shape (N, n-1).

    n=2 frame: e_theta. n=3 frame: (e_theta, e_phi).
    """
    grid = f.grid
    if L is None:
        L = grid.max_degree
    e = analyze(f, L)
    tab = grid.derivative_tables(L)
    if grid.dim_n == 2:
        return (tab["t"] @ e.coeffs)[:, None]
    gt = tab["th"] @ e.coeffs
    gp = (tab["ph"] @ e.coeffs) / np.sin(grid.theta)
    return np.column_stack([gt, gp])
