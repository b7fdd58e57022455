"""Band-limited sphere functions from harmonic coefficient lists.

Text form: ``"l<degree>[,m<order>]:<coeff>;..."``, e.g. ``"l0:1;l2:0.2;l4,m1:-0.05"``.

Amplitudes multiply the user-facing harmonics of :func:`bm_lab.spherical.amplitude_scale`:
on S^1 order 0 is cos(l t) and order 1 is sin(l t); on S^2 order m in
[-l, l] selects the real harmonic normalized so that m=0 is P_l(cos theta).
"""

from __future__ import annotations

import re
from typing import Iterable, Sequence

import numpy as np

from .errors import UsageError
from .spherical import FieldOnSphere, HarmonicExpansion, SphereGrid, amplitude_scale, mode_table, synthesize

Term = tuple[int, int, float]

_TERM = re.compile(r"^\s*l\s*(\d+)\s*(?:,\s*m\s*(-?\d+)\s*)?:\s*([-+0-9.eE]+)\s*$")


def parse_phi(spec: str, dim_n: int, field: str = "phi") -> list[Term]:
    if spec is None or not spec.strip():
        raise UsageError(field, "empty harmonic coefficient list")
    terms: list[Term] = []
    for part in spec.split(";"):
        if not part.strip():
            continue
        m = _TERM.match(part)
        if m is None:
            raise UsageError(field, f"cannot parse term {part.strip()!r}")
        l = int(m.group(1))
        order = int(m.group(2)) if m.group(2) is not None else 0
        try:
            value = float(m.group(3))
        except ValueError:
            raise UsageError(field, f"bad coefficient in {part.strip()!r}") from None
        check_term(dim_n, l, order, field)
        terms.append((l, order, value))
    if not terms:
        raise UsageError(field, "empty harmonic coefficient list")
    return terms


def check_term(dim_n: int, l: int, order: int, field: str = "phi") -> None:
    if l < 0:
        raise UsageError(field, "degree must be non-negative")
    if dim_n == 2:
        if order not in (0, 1) or (l == 0 and order != 0):
            raise UsageError(field, f"order {order} invalid for degree {l} on S^1")
    elif abs(order) > l:
        raise UsageError(field, f"order {order} invalid for degree {l} on S^2")


def format_phi(terms: Iterable[Term]) -> str:
    parts = []
    for l, m, v in terms:
        parts.append(f"l{l}:{v!r}" if m == 0 else f"l{l},m{m}:{v!r}")
    return ";".join(parts)


def mode_index(dim_n: int, l: int, order: int) -> int:
    if dim_n == 2:
        return 0 if l == 0 else 2 * l - 1 + order
    return l * l + order + l


def expansion_from_terms(terms: Sequence[Term], dim_n: int) -> HarmonicExpansion:
    L = max(l for l, _, _ in terms)
    L = max(L, 0)
    c = np.zeros(len(mode_table(dim_n, L)[0]))
    for l, m, v in terms:
        check_term(dim_n, l, m)
        c[mode_index(dim_n, l, m)] += v * amplitude_scale(dim_n, l)
    return HarmonicExpansion(dim_n, L, c)


def field_from_terms(terms: Sequence[Term], grid: SphereGrid) -> FieldOnSphere:
    e = expansion_from_terms(terms, grid.dim_n)
    even = all(l % 2 == 0 for l, _, v in terms if v != 0.0)
    f = synthesize(e, grid, parity="even" if even else "none")
    return f


def terms_from_expansion(e: HarmonicExpansion, drop_below: float = 0.0) -> list[Term]:
    ls, ms = mode_table(e.dim_n, e.max_degree)
    out = []
    for l, m, c in zip(ls, ms, e.coeffs):
        v = float(c / amplitude_scale(e.dim_n, int(l)))
        if abs(v) > drop_below:
            out.append((int(l), int(m), v))
    return out


def random_even_terms(rng: np.random.Generator, dim_n: int, degrees: Sequence[int],
                      amplitude: float = 1.0, mean: float = 0.0) -> list[Term]:
    """Random even band-limited function; every order of each listed degree gets a normal draw."""
    terms: list[Term] = []
    if mean != 0.0:
        terms.append((0, 0, float(mean)))
    for l in degrees:
        if l % 2:
            raise ValueError("even functions need even degrees")
        orders = (0, 1) if dim_n == 2 else range(-l, l + 1)
        if l == 0:
            orders = (0,)
        for m in orders:
            terms.append((int(l), int(m), float(amplitude * rng.normal())))
    return terms
