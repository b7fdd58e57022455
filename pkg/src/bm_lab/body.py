"""Support functions of smooth convex bodies and their boundary geometry.

A body is stored through its support function h sampled on a sphere grid.
Angular derivatives are spectral (full band of the grid), so h need not be
band-limited, only smooth.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import NotConvexError, OriginOutsideError, ParityError
from .phispec import Term, check_term, field_from_terms, terms_from_expansion
from .spherical import (
    FieldOnSphere,
    HarmonicExpansion,
    SphereGrid,
    analyze,
    build_grid,
    evaluate_expansion,
    sphere_gradient,
)

__all__ = [
    "SupportFunction",
    "BodyGeometry",
    "BodyFamily",
    "validate_in_S",
    "lp_sum",
    "log_sum",
    "family_at",
    "translate",
    "ball",
    "ellipse",
]


@dataclass(frozen=True, eq=False)
class SupportFunction:
    grid: SphereGrid
    values: np.ndarray
    parity: str = "even"
    terms: Optional[tuple] = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.size,):
            raise ValueError("support function has the wrong number of samples")
        if not np.all(np.isfinite(v)) or np.min(v) <= 0.0:
            raise OriginOutsideError(f"support function not positive (min {np.min(v):.3e})")
        if self.parity == "even":
            if np.max(np.abs(v - v[self.grid.antipode])) > 1e-12 * np.max(v):
                raise ParityError("support function declared even is not even")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def dim_n(self) -> int:
        return self.grid.dim_n

    @property
    def field(self) -> FieldOnSphere:
        return FieldOnSphere(self.grid, self.values, "none")

    @property
    def spectral(self) -> HarmonicExpansion:
        e = self._cache.get("spectral")
        if e is None:
            e = analyze(self.field, self.grid.max_degree)
            self._cache["spectral"] = e
        return e

    @classmethod
    def from_terms(cls, dim_n: int, resolution: int, terms: Sequence[Term]) -> "SupportFunction":
        grid = build_grid(dim_n, resolution)
        for l, m, _ in terms:
            check_term(dim_n, l, m, "coefficients")
        f = field_from_terms(terms, grid)
        parity = "even" if f.parity == "even" else "none"
        return cls(grid, f.values, parity, tuple((int(l), int(m), float(v)) for l, m, v in terms))

    def to_terms(self) -> list[Term]:
        if self.terms is not None:
            return list(self.terms)
        return terms_from_expansion(self.spectral)

    def to_json(self) -> str:
        doc = {
            "dim_n": self.dim_n,
            "resolution": self.grid.resolution,
            "coefficients": [{"l": l, "m": m, "value": v} for l, m, v in self.to_terms()],
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SupportFunction":
        doc = json.loads(text)
        terms = [(int(c["l"]), int(c["m"]), float(c["value"])) for c in doc["coefficients"]]
        return cls.from_terms(int(doc["dim_n"]), int(doc["resolution"]), terms)

    def scaled(self, m: float) -> "SupportFunction":
        terms = None if self.terms is None else tuple((l, o, m * v) for l, o, v in self.terms)
        return SupportFunction(self.grid, m * self.values, self.parity, terms)

    def evaluate(self, theta, phi=None, derivatives: int = 0) -> dict:
        """Trigonometric/spherical interpolant of h (and derivatives) at arbitrary angles."""
        return evaluate_expansion(self.spectral, theta, phi, derivatives)


def ball(dim_n: int, resolution: int, radius: float = 1.0) -> SupportFunction:
    return SupportFunction.from_terms(dim_n, resolution, [(0, 0, float(radius))])


def ellipse(a: float, b: float, resolution: int) -> SupportFunction:
    grid = build_grid(2, resolution)
    t = grid.theta
    return SupportFunction(grid, np.sqrt(a * a * np.cos(t) ** 2 + b * b * np.sin(t) ** 2))


@dataclass(frozen=True, eq=False)
class BodyGeometry:
    """Boundary geometry indexed by the outer normal xi (one row per grid node).

    Q is the (n-1)x(n-1) matrix h_ij + h delta_ij in the orthonormal frame
    (e_theta[, e_phi]); ``cofactor`` is det(Q) Q^{-1}.
    """

    h: SupportFunction
    F: np.ndarray
    Q: np.ndarray
    kappa: np.ndarray
    surface_density: np.ndarray
    cofactor: np.ndarray
    trace_cofactor: np.ndarray
    min_eigenvalue: np.ndarray
    margin: float

    @property
    def grid(self) -> SphereGrid:
        return self.h.grid

    @property
    def dim_n(self) -> int:
        return self.h.dim_n

    def field(self, values, parity: str = "none") -> FieldOnSphere:
        return FieldOnSphere(self.grid, values, parity)

    def boundary_point(self, theta) -> np.ndarray:
        """F at arbitrary normal angles (n=2 only)."""
        if self.dim_n != 2:
            raise ValueError("boundary_point is only available for n=2")
        d = self.h.evaluate(theta, derivatives=1)
        c, s = np.cos(theta), np.sin(theta)
        return np.column_stack([d["Y"] * c - d["t"] * s, d["Y"] * s + d["t"] * c])

    def quadratic_form(self, grad_a: np.ndarray, grad_b: Optional[np.ndarray] = None) -> np.ndarray:
        """c grad_a . grad_b per node, gradients in the orthonormal frame."""
        if grad_b is None:
            grad_b = grad_a
        return np.einsum("ni,nij,nj->n", grad_a, self.cofactor, grad_b)


def _frames3(theta, phi):
    ct, st, cp, sp = np.cos(theta), np.sin(theta), np.cos(phi), np.sin(phi)
    xi = np.column_stack([st * cp, st * sp, ct])
    et = np.column_stack([ct * cp, ct * sp, -st])
    ep = np.column_stack([-sp, cp, np.zeros_like(cp)])
    return xi, et, ep


def validate_in_S(h: SupportFunction, margin: Optional[float] = None) -> BodyGeometry:
    """Compute F, Q(h), kappa, det Q and check Q > margin at every node."""
    grid = h.grid
    if margin is None:
        margin = 1e-6 * float(np.min(h.values))
    L = grid.max_degree
    c = h.spectral.coeffs
    tab = grid.derivative_tables(L)
    v = h.values
    if grid.dim_n == 2:
        ht = tab["t"] @ c
        htt = tab["tt"] @ c
        q = htt + v
        Q = q[:, None, None]
        xi = grid.nodes
        et = np.column_stack([-xi[:, 1], xi[:, 0]])
        F = v[:, None] * xi + ht[:, None] * et
        det = q
        cof = np.ones_like(Q)
        trc = np.ones_like(q)
        mins = q
    else:
        th, ph = grid.theta, grid.phi
        st, cot = np.sin(th), np.cos(th) / np.sin(th)
        h_t = tab["th"] @ c
        h_p = tab["ph"] @ c
        h_tt = tab["thth"] @ c
        h_tp = tab["thph"] @ c
        h_pp = tab["phph"] @ c
        q11 = h_tt + v
        q12 = (h_tp - cot * h_p) / st
        q22 = h_pp / st**2 + cot * h_t + v
        Q = np.stack([np.stack([q11, q12], -1), np.stack([q12, q22], -1)], -2)
        xi, et, ep = _frames3(th, ph)
        F = v[:, None] * xi + h_t[:, None] * et + (h_p / st)[:, None] * ep
        det = q11 * q22 - q12 * q12
        cof = np.stack([np.stack([q22, -q12], -1), np.stack([-q12, q11], -1)], -2)
        trc = q11 + q22
        mins = 0.5 * (trc - np.sqrt((q11 - q22) ** 2 + 4 * q12 * q12))
    worst = int(np.argmin(mins))
    if mins[worst] < margin:
        raise NotConvexError(
            f"Q(h) not positive definite: eigenvalue {mins[worst]:.3e} at node {worst}",
            worst,
            float(mins[worst]),
        )
    for a in (F, Q, det, cof, trc, mins):
        a.setflags(write=False)
    kappa = 1.0 / det
    kappa.setflags(write=False)
    return BodyGeometry(h, F, Q, kappa, det, cof, trc, mins, margin)


def _require_same_grid(h1: SupportFunction, h2: SupportFunction) -> None:
    if h1.grid is not h2.grid:
        raise ValueError("support functions live on different grids")


def _combine(values: np.ndarray, h1: SupportFunction, h2: SupportFunction) -> SupportFunction:
    parity = "even" if h1.parity == "even" and h2.parity == "even" else "none"
    out = SupportFunction(h1.grid, values, parity)
    validate_in_S(out)
    return out


def lp_sum(h1: SupportFunction, h2: SupportFunction, p: float, s: float) -> SupportFunction:
    """((1-s) h1^p + s h2^p)^{1/p}; must stay in the smooth convex class."""
    _require_same_grid(h1, h2)
    if p <= 0:
        raise ValueError("lp_sum needs p > 0; use log_sum for p = 0")
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    if s == 0.0:
        return h1
    if s == 1.0:
        return h2
    vals = ((1.0 - s) * h1.values**p + s * h2.values**p) ** (1.0 / p)
    return _combine(vals, h1, h2)


def log_sum(h1: SupportFunction, h2: SupportFunction, s: float) -> SupportFunction:
    """h1^{1-s} h2^s."""
    _require_same_grid(h1, h2)
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    if s == 0.0:
        return h1
    if s == 1.0:
        return h2
    vals = h1.values ** (1.0 - s) * h2.values**s
    return _combine(vals, h1, h2)


@dataclass(frozen=True, eq=False)
class BodyFamily:
    """One-parameter family through ``base``.

    lp mode: h_t = (h^p + t f)^{1/p} with f = phi^p given directly.
    log mode: h_t = h exp(t g) with g = log(phi~) given directly.
    """

    mode: str
    base: SupportFunction
    direction: FieldOnSphere
    p: Optional[float]
    eps: float

    def __post_init__(self):
        if self.mode not in ("lp", "log"):
            raise ValueError("mode must be 'lp' or 'log'")
        if self.direction.grid is not self.base.grid:
            raise ValueError("direction and base live on different grids")
        if self.mode == "lp" and (self.p is None or self.p <= 0):
            raise ValueError("lp mode needs p > 0")
        if self.eps < 0:
            raise ValueError("eps must be non-negative")
        for t in np.linspace(-self.eps, self.eps, 9):
            validate_in_S(self._values_at(float(t)))

    def _values_at(self, t: float) -> SupportFunction:
        h = self.base.values
        g = self.direction.values
        if self.mode == "lp":
            inner = h**self.p + t * g
            if np.min(inner) <= 0:
                raise OriginOutsideError("h^p + t phi^p is not positive")
            vals = inner ** (1.0 / self.p)
        else:
            vals = h * np.exp(t * g)
        parity = "even" if self.base.parity == "even" and self.direction.is_even() else "none"
        return SupportFunction(self.base.grid, vals, parity)

    def derivatives(self) -> tuple[np.ndarray, np.ndarray]:
        """(h', h'') at t = 0."""
        h = self.base.values
        g = self.direction.values
        if self.mode == "lp":
            p = self.p
            d1 = g * h ** (1.0 - p) / p
            d2 = (1.0 - p) / (p * p) * g * g * h ** (1.0 - 2.0 * p)
        else:
            d1 = h * g
            d2 = h * g * g
        return d1, d2


def family_at(fam: BodyFamily, t: float) -> SupportFunction:
    if abs(t) > fam.eps * (1 + 1e-12):
        raise ValueError(f"t={t} outside [-{fam.eps}, {fam.eps}]")
    if t == 0.0:
        return fam.base
    h = fam._values_at(t)
    validate_in_S(h)
    return h


def translate(h: SupportFunction, v) -> SupportFunction:
    """Support function of the translate Omega + v: h(xi) + v.xi."""
    v = np.asarray(v, dtype=float)
    if v.shape != (h.dim_n,):
        raise ValueError("translation vector has the wrong dimension")
    vals = h.values + h.grid.nodes @ v
    if np.min(vals) <= 0:
        raise OriginOutsideError("translated body no longer contains the origin")
    parity = h.parity if not np.any(v) else "none"
    return SupportFunction(h.grid, vals, parity)


def field_gradient(f: FieldOnSphere) -> np.ndarray:
    """Frame gradient of a sphere field at full grid resolution."""
    return sphere_gradient(f, f.grid.max_degree)


def relative_sup(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), math.ulp(1.0)))
