import math

import numpy as np
import pytest
from matplotlib.tri import LinearTriInterpolator, Triangulation
from numpy.testing import assert_allclose

from bm_lab.body import ball, ellipse, validate_in_S
from bm_lab.fem import FEMSystem, assemble, mesh_from_body, reference_disk
from bm_lab.functionals import solve_torsion


@pytest.fixture(scope="module")
def disk():
    return validate_in_S(ball(2, 64))


def test_reference_disk_boundary_angles():
    rho, theta, tris, bnd = reference_disk(128)
    assert len(bnd) == 128
    assert_allclose(rho[bnd], 1.0)
    assert_allclose(theta[bnd], 2 * np.pi * np.arange(128) / 128, atol=1e-14)
    # every vertex is used
    assert np.array_equal(np.unique(tris), np.arange(len(rho)))


def test_unit_disk_area(disk):
    mesh = mesh_from_body(disk, 3)
    assert mesh.n_triangles >= 20000
    assert abs(mesh.area - math.pi) < 1e-3


def test_ellipse_area():
    mesh = mesh_from_body(validate_in_S(ellipse(1.5, 1.0, 64)), 3)
    assert abs(mesh.area - 1.5 * math.pi) < 2e-3


def test_refinement_zero_keeps_boundary_ring():
    geom = validate_in_S(ellipse(1.5, 1.0, 64))
    mesh = mesh_from_body(geom, 0)
    assert len(mesh.boundary) == geom.grid.size
    assert np.array_equal(mesh.vertices[mesh.boundary], geom.F)


@pytest.mark.parametrize("r", [0, 1, 2])
def test_triangles_positively_oriented(r):
    geom = validate_in_S(ellipse(1.3, 0.8, 64))
    assert np.all(mesh_from_body(geom, r).triangle_areas() > 0)


def test_refined_boundary_lies_on_body():
    # every fine boundary vertex is F at its normal angle, so h(xi) = F . xi there
    geom = validate_in_S(ellipse(1.5, 1.0, 64))
    mesh = mesh_from_body(geom, 2)
    t = mesh.boundary_angles
    X = mesh.vertices[mesh.boundary]
    h_exact = np.sqrt(2.25 * np.cos(t) ** 2 + np.sin(t) ** 2)
    assert_allclose(X[:, 0] * np.cos(t) + X[:, 1] * np.sin(t), h_exact, rtol=1e-10)


def test_off_dump(disk):
    mesh = mesh_from_body(disk, 0)
    lines = mesh.to_off().splitlines()
    assert lines[0] == "OFF"
    nv, nt, ne = map(int, lines[1].split())
    assert (nv, nt, ne) == (mesh.n_vertices, mesh.n_triangles, 0)
    assert len(lines) == 2 + nv + nt
    assert lines[-1].startswith("3 ")


def test_assembly_identities(disk):
    mesh = mesh_from_body(disk, 1)
    K, M = assemble(mesh)
    assert_allclose((K - K.T).toarray(), 0.0, atol=1e-13)
    assert_allclose(K @ np.ones(mesh.n_vertices), 0.0, atol=1e-12)
    assert_allclose(M.sum(), mesh.area, rtol=1e-13)
    # energy of a linear function is area * |grad|^2
    x, y = mesh.vertices.T
    u = 2 * x - 3 * y
    assert_allclose(u @ (K @ u), 13 * mesh.area, rtol=1e-12)


def test_boundary_flux_of_linear_function(disk):
    # u = x solves Laplace; consistent flux gives du/dn = cos(theta)
    mesh = mesh_from_body(disk, 2)
    sysm = FEMSystem(mesh)
    u = mesh.vertices[:, 0].copy()
    flux = sysm.boundary_flux((sysm.K @ u)[sysm.bnd])
    assert_allclose(flux, np.cos(mesh.boundary_angles), atol=2e-3)


def test_torsion_boundary_discrepancy_rate(disk):
    d = []
    for r in (1, 2, 3):
        s = solve_torsion(disk, r, keep_context=False)
        d.append(abs(s.value - s.extra["boundary_value"]))
    orders = np.log2(np.array(d[:-1]) / np.array(d[1:]))
    assert np.all(orders >= 1.8)


def test_boundary_hessian_identity_on_disk(disk):
    sol = solve_torsion(disk, 4)
    ctx = sol.context
    mesh = ctx.system.mesh
    interp = LinearTriInterpolator(Triangulation(mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.triangles),
                                   ctx.u)
    delta = 0.1
    angles = np.linspace(0, 2 * np.pi, 16, endpoint=False)
    hess = []
    for a in angles:
        c, s = math.cos(a), math.sin(a)
        r = np.array([1.0, 1.0 - delta, 1.0 - 2 * delta]) * (1 - 1e-12)
        vals = np.asarray(interp(r * c, r * s))
        hess.append((vals[0] - 2 * vals[1] + vals[2]) / delta**2)
    rhs = disk.kappa * sol.boundary_speed.values * disk.trace_cofactor - 1.0
    assert_allclose(rhs, -0.5, rtol=2e-3)
    assert_allclose(hess, -0.5, rtol=5e-2)
