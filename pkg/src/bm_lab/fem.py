"""P1 finite elements on planar convex bodies given by support functions.

Mesh: a fixed ring triangulation of the unit disk, pushed forward by
(rho, theta) -> rho * F(theta), where F is the inverse Gauss map. The
boundary ring has N * 2^refinement vertices, one per normal angle
2*pi*j/N_b, so every grid node of the sphere is a boundary vertex. The
topology depends only on (N, refinement), which makes discrete functionals
smooth in the body.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .body import BodyGeometry
from .errors import SolverError

__all__ = ["Mesh2D", "mesh_from_body", "reference_disk", "FEMSystem", "assemble"]


@dataclass(frozen=True, eq=False)
class Mesh2D:
    vertices: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray
    boundary_angles: np.ndarray
    grid_stride: int
    refinement: int
    size: float

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def triangle_areas(self) -> np.ndarray:
        P = self.vertices[self.triangles]
        e1, e2 = P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def area(self) -> float:
        return float(np.sum(self.triangle_areas()))

    def to_off(self) -> str:
        lines = ["OFF", f"{self.n_vertices} {self.n_triangles} 0"]
        lines += [f"{x!r} {y!r} 0.0" for x, y in self.vertices]
        lines += [f"3 {a} {b} {c}" for a, b, c in self.triangles]
        return "\n".join(lines) + "\n"


def _zipper(inner: np.ndarray, ang_in: np.ndarray, outer: np.ndarray, ang_out: np.ndarray) -> list:
    """Triangulate the strip between two concentric rings (angles ascending from ~0)."""
    ma, mb = len(inner), len(outer)
    tris = []
    i = j = 0
    while i < ma or j < mb:
        a_next = ang_in[i + 1] if i < ma else np.inf
        b_next = ang_out[j + 1] if j < mb else np.inf
        if a_next <= b_next:
            tris.append((inner[i % ma], outer[j % mb], inner[(i + 1) % ma]))
            i += 1
        else:
            tris.append((inner[i % ma], outer[j % mb], outer[(j + 1) % mb]))
            j += 1
    return tris


@lru_cache(maxsize=16)
def reference_disk(nb: int):
    """Ring triangulation of the unit disk with ``nb`` boundary vertices.

    Returns (rho, theta, triangles, boundary) with boundary vertex j at
    angle 2*pi*j/nb.
    """
    if nb < 8:
        raise ValueError("need at least 8 boundary vertices")
    K = max(2, int(round(nb / (2.0 * math.pi) / (math.sqrt(3.0) / 2.0))))
    rho = [0.0]
    theta = [0.0]
    rings = []
    idx = 1
    for k in range(1, K + 1):
        m = nb if k == K else max(6, int(round(nb * k / K)))
        off = 0.0 if (K - k) % 2 == 0 else 0.5
        ang = 2.0 * np.pi * (np.arange(m) + off) / m
        ids = np.arange(idx, idx + m)
        idx += m
        rho += [k / K] * m
        theta += list(ang)
        rings.append((ids, ang))
    tris = []
    ids1, ang1 = rings[0]
    for j in range(len(ids1)):
        tris.append((0, ids1[j], ids1[(j + 1) % len(ids1)]))
    for (ia, aa), (ib, ab) in zip(rings[:-1], rings[1:]):
        ext_a = np.append(aa, aa[0] + 2 * np.pi)
        ext_b = np.append(ab, ab[0] + 2 * np.pi)
        tris += _zipper(ia, ext_a, ib, ext_b)
    out = (np.array(rho), np.array(theta), np.array(tris, dtype=np.int64), rings[-1][0].copy())
    for a in out:
        a.setflags(write=False)
    return out


def mesh_from_body(geom: BodyGeometry, refinement: int) -> Mesh2D:
    if geom.dim_n != 2:
        raise ValueError("planar meshes need n = 2")
    if refinement < 0:
        raise ValueError("refinement must be non-negative")
    stride = 2**refinement
    nb = geom.grid.size * stride
    rho, theta, tris, bnd = reference_disk(nb)
    F = geom.boundary_point(theta)
    verts = rho[:, None] * F
    # boundary vertices that coincide with grid nodes take F exactly
    verts[bnd[::stride]] = geom.F
    mesh = Mesh2D(verts, tris, bnd, theta[bnd], stride, refinement, 0.0)
    areas = mesh.triangle_areas()
    if np.min(areas) <= 0:
        raise SolverError("degenerate or inverted triangle in mapped mesh")
    P = verts[tris]
    edges = np.concatenate([P[:, 1] - P[:, 0], P[:, 2] - P[:, 1], P[:, 0] - P[:, 2]])
    size = float(np.max(np.hypot(edges[:, 0], edges[:, 1])))
    verts.setflags(write=False)
    return Mesh2D(verts, tris, bnd, theta[bnd], stride, refinement, size)


def assemble(mesh: Mesh2D) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Stiffness and consistent mass matrices."""
    V, T = mesh.vertices, mesh.triangles
    P = V[T]
    e1, e2 = P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]
    area = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    # gradient of barycentric i is rot(-90) of the opposite edge over 2A
    opp = np.stack([P[:, 2] - P[:, 1], P[:, 0] - P[:, 2], P[:, 1] - P[:, 0]], axis=1)
    G = np.stack([opp[..., 1], -opp[..., 0]], axis=-1) / (2.0 * area)[:, None, None]
    Kloc = area[:, None, None] * np.einsum("tik,tjk->tij", G, G)
    Mloc = (area / 12.0)[:, None, None] * (np.ones((3, 3)) + np.eye(3))
    rows = np.repeat(T, 3, axis=1).ravel()
    cols = np.tile(T, (1, 3)).ravel()
    n = len(V)
    K = sp.coo_matrix((Kloc.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    M = sp.coo_matrix((Mloc.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    return K, M


def boundary_mass(mesh: Mesh2D) -> sp.csc_matrix:
    """Consistent P1 mass matrix of the boundary polygon."""
    X = mesh.vertices[mesh.boundary]
    nb = len(X)
    L = np.hypot(*(np.roll(X, -1, axis=0) - X).T)
    i = np.arange(nb)
    j = (i + 1) % nb
    diag = (L + np.roll(L, 1)) / 3.0
    rows = np.concatenate([i, i, j])
    cols = np.concatenate([i, j, i])
    vals = np.concatenate([diag, L / 6.0, L / 6.0])
    return sp.coo_matrix((vals, (rows, cols)), shape=(nb, nb)).tocsc()


class FEMSystem:
    """Assembled matrices plus factorizations reused across solves on one mesh."""

    def __init__(self, mesh: Mesh2D):
        self.mesh = mesh
        self.K, self.M = assemble(mesh)
        n = mesh.n_vertices
        is_b = np.zeros(n, dtype=bool)
        is_b[mesh.boundary] = True
        self.interior = np.flatnonzero(~is_b)
        self.bnd = mesh.boundary
        self.load = np.asarray(self.M.sum(axis=1)).ravel()
        self.K_II = self.K[self.interior][:, self.interior].tocsc()
        self.K_IB = self.K[self.interior][:, self.bnd].tocsc()
        self.M_II = self.M[self.interior][:, self.interior].tocsc()
        self.M_IB = self.M[self.interior][:, self.bnd].tocsc()
        # symmetric ordering roughly halves the fill of the default
        self._lu = spla.splu(self.K_II, permc_spec="MMD_AT_PLUS_A", options={"SymmetricMode": True})
        self._blu = spla.splu(boundary_mass(mesh))

    def solve_interior(self, rhs: np.ndarray) -> np.ndarray:
        return self._lu.solve(rhs)

    def boundary_flux(self, residual_b: np.ndarray) -> np.ndarray:
        """Outward normal derivative at boundary vertices from the nodal residual."""
        return self._blu.solve(residual_b)

    def full(self, interior_values: np.ndarray, boundary_values=None) -> np.ndarray:
        u = np.zeros(self.mesh.n_vertices)
        u[self.interior] = interior_values
        if boundary_values is not None:
            u[self.bnd] = boundary_values
        return u
