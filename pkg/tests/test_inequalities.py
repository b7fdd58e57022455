import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.special import jn_zeros, jv, jvp

from bm_lab.body import ball, ellipse, validate_in_S
from bm_lab.errors import DegenerateInputError, ParityError, ResonanceError
from bm_lab.functionals import solve_torsion, torsion_ball
from bm_lab.inequalities import (
    InequalityReport,
    TorsionEvaluator,
    bm_concavity_scan,
    classify,
    local_theorem_scan,
    minkowski_corollaries,
    poincare_capacity_ball,
    poincare_eigen_ball,
    poincare_log_ball,
    poincare_torsion_ball,
    poincare_torsion_general,
    problem_a_form,
    theorem_family_body,
)
from bm_lab.phispec import field_from_terms
from bm_lab.spherical import build_grid

PI = math.pi


@pytest.fixture(scope="module")
def g2():
    return build_grid(2, 64)


@pytest.fixture(scope="module")
def g3():
    return build_grid(3, 16)


@pytest.fixture(scope="module")
def disk():
    return validate_in_S(ball(2, 64))


def test_classify():
    assert classify(1.0, 0.1) == "pass"
    assert classify(0.75, 0.25) == "pass"
    assert classify(0.2, 0.1) == "inconclusive"
    assert classify(-0.2, 0.1) == "inconclusive"
    assert classify(-0.31, 0.1) == "fail"
    assert classify(-0.75, 0.25) == "inconclusive"


def test_torsion_ball_closed_forms(g2, g3):
    r = poincare_torsion_ball(field_from_terms([(2, 0, 1.0)], g2), 0.5)
    assert_allclose(r.margin, 4.5 * PI, rtol=1e-12)
    assert r.verdict == "pass"
    r = poincare_torsion_ball(field_from_terms([(2, 0, 1.0)], g3), 1.0)
    assert_allclose(r.margin, 24 * PI / 5, rtol=1e-12)


def test_log_ball_closed_form(g2):
    r = poincare_log_ball(field_from_terms([(2, 0, 1.0)], g2))
    assert_allclose(r.margin, 4 * PI, rtol=1e-12)
    assert r.params["p"] == 0.0


def test_capacity_ball_closed_form(g3):
    r = poincare_capacity_ball(field_from_terms([(2, 0, 1.0)], g3), 1.0)
    assert_allclose(r.margin, 8 * PI / 5, rtol=1e-12)
    assert r.verdict == "pass"
    with pytest.raises(ValueError):
        poincare_capacity_ball(field_from_terms([(2, 0, 1.0)], g3), 0.5)


def test_eigen_ball_against_bessel(g2):
    j = jn_zeros(0, 1)[0]
    for l in (2, 4, 6):
        r = poincare_eigen_ball(field_from_terms([(l, 0, 1.0)], g2))
        exact = j * j * (l * l + 1 + 2 * j * jvp(l, j) / jv(l, j))
        assert_allclose(r.margin, exact, rtol=1e-8)
        assert r.verdict == "pass"
    assert_allclose(poincare_eigen_ball(field_from_terms([(2, 0, 1.0)], g2)).margin, 39.2284, rtol=1e-5)


def test_eigen_ball_rejects_nonzero_mean(g2):
    with pytest.raises(ResonanceError):
        poincare_eigen_ball(field_from_terms([(0, 0, 0.1), (2, 0, 1.0)], g2))
    r = poincare_eigen_ball(field_from_terms([(2, 0, 0.0)], g2))
    assert r.margin == 0.0


def test_spectral_gap_saturates_at_degree_two(g2, g3):
    for g in (g2, g3):
        gap = poincare_torsion_ball(field_from_terms([(2, 0, 1.0)], g), 1.0).artifacts["spectral_gap"]
        assert gap["holds"]
        assert_allclose(gap["gradient"], gap["bound"], rtol=1e-12)
        gap = poincare_torsion_ball(field_from_terms([(4, 0, 1.0)], g), 1.0).artifacts["spectral_gap"]
        assert gap["gradient"] > 1.5 * gap["bound"]


def test_adding_constants_leaves_margin_unchanged(g2):
    base = [(2, 0, 0.3), (4, 1, -0.2)]
    f = field_from_terms(base, g2)
    f_shift = field_from_terms(base + [(0, 0, 1.7)], g2)
    for p in (0.5, 1.0, 2.0):
        assert_allclose(poincare_torsion_ball(f_shift, p).margin, poincare_torsion_ball(f, p).margin, rtol=1e-10)
    assert_allclose(poincare_log_ball(f_shift).margin, poincare_log_ball(f).margin, rtol=1e-10)


def test_margin_per_unit_norm_grows_with_degree(g2):
    ratios = []
    for l in (2, 4, 6, 8):
        f = field_from_terms([(l, 0, 1.0)], g2)
        ratios.append(poincare_torsion_ball(f, 0.7).margin / np.dot(g2.weights, f.values**2))
    assert np.all(np.diff(ratios) > 0)


def test_ball_input_errors(g2):
    with pytest.raises(ParityError):
        poincare_torsion_ball(field_from_terms([(1, 0, 1.0)], g2), 1.0)
    with pytest.raises(DegenerateInputError):
        poincare_torsion_ball(field_from_terms([(0, 0, 2.0)], g2), 1.0)
    with pytest.raises(DegenerateInputError):
        poincare_log_ball(field_from_terms([(0, 0, 2.0)], g2))
    with pytest.raises(ValueError):
        poincare_torsion_ball(field_from_terms([(2, 0, 1.0)], g2), 0.0)


@pytest.mark.parametrize("terms,p,expected", [
    ([(1, 0, 1.0)], 1.0, 0.0),
    ([(1, 0, 1.0)], 2.0, PI / 4),
    ([(0, 0, 1.0)], 1.0, 0.0),
    ([(2, 0, 1.0)], 1.0, 5 * PI / 4),
])
def test_general_form_on_disk(disk, terms, p, expected):
    sol = torsion_ball(2, 1.0, disk.grid)
    r = poincare_torsion_general(disk, sol, field_from_terms(terms, disk.grid), p)
    assert abs(r.margin - expected) < 1e-12
    assert r.verdict in ("pass", "inconclusive")


def test_problem_a_on_disk(disk):
    sol = torsion_ball(2, 1.0, disk.grid)
    cos2 = field_from_terms([(2, 0, 1.0)], disk.grid)
    assert_allclose(problem_a_form(disk, sol, cos2, 0.5).margin, 9 * PI / 8, rtol=1e-12)
    r = problem_a_form(disk, sol, cos2, 0.0)
    assert_allclose(r.margin, PI, rtol=1e-12)
    assert r.artifacts["exploratory"] is False
    # routed through the general verifier for p < 1
    assert poincare_torsion_general(disk, sol, cos2, 0.5).name == "problem_a_form"
    with pytest.raises(ValueError):
        problem_a_form(disk, sol, cos2, 1.0)


def test_problem_a_fem_disk_and_ellipse(disk):
    cos2 = field_from_terms([(2, 0, 1.0)], disk.grid)
    r = problem_a_form(disk, solve_torsion(disk, 2), cos2, 0.5)
    assert_allclose(r.margin, 9 * PI / 8, rtol=1e-4)
    assert r.est_error > 0
    geom = validate_in_S(ellipse(1.2, 1.0, 64))
    r = problem_a_form(geom, solve_torsion(geom, 2), geom.field(cos2.values), 0.5)
    assert r.artifacts["exploratory"] is True
    assert r.params["exploratory"] is True
    assert r.verdict == "pass"


def test_dilate_scans_are_flat():
    b1, b2 = ball(2, 32), ball(2, 32, 1.5)
    for p in (0.0, 0.5):
        rep = bm_concavity_scan(b1, b2, p, np.linspace(0, 1, 5), refinement=2)
        m = np.array(rep.artifacts["chord_margin"])
        e = np.array(rep.artifacts["chord_est"])
        assert np.all(np.abs(m) <= 3 * e)
        assert rep.verdict != "fail"
        assert len(rep.artifacts["scan_table"]) == 5


def test_identical_pair_has_zero_margins():
    h = ellipse(1.3, 1.0, 32)
    ev = TorsionEvaluator(2)
    rep = bm_concavity_scan(h, h, 0.5, np.linspace(0, 1, 5), evaluator=ev)
    assert np.all(np.array(rep.artifacts["chord_margin"]) == 0.0)
    assert rep.verdict == "inconclusive"
    assert ev.solves == 1


def test_distinct_pair_scan_passes():
    grid = build_grid(2, 32)
    phi = field_from_terms([(2, 0, 1.0)], grid)
    h1 = theorem_family_body(phi, 0.5, -0.05)
    h2 = theorem_family_body(phi, 0.5, 0.05)
    rep = bm_concavity_scan(h1, h2, 0.5, np.linspace(0, 1, 5), refinement=2)
    assert rep.verdict == "pass"
    assert rep.artifacts["second_difference_ok"]


def test_default_scan_grid_has_21_points():
    b = ball(2, 32)
    rep = bm_concavity_scan(b, b, 1.0, refinement=1)
    assert len(rep.artifacts["scan_table"]) == 21
    with pytest.raises(ValueError):
        bm_concavity_scan(b, b, 1.0, [0.0, 0.5], refinement=1)
    with pytest.raises(ValueError):
        bm_concavity_scan(b, b, -1.0, refinement=1)


def test_local_scan_with_zero_radius():
    grid = build_grid(2, 32)
    phi = field_from_terms([(2, 0, 1.0)], grid)
    rep = local_theorem_scan(phi, 0.5, 0.0, n_pairs=3, s_grid=np.linspace(0, 1, 3), refinement=1)
    assert rep.artifacts["distinct_bodies"] == 1
    assert all(pr["margin"] == 0.0 for pr in rep.artifacts["pairs"])
    assert rep.verdict == "inconclusive"


def test_local_scan_small_family():
    grid = build_grid(2, 32)
    phi = field_from_terms([(2, 0, 1.0)], grid)
    rep = local_theorem_scan(phi, 0.0, 0.05, n_pairs=3, s_grid=np.linspace(0, 1, 5), refinement=2)
    c = rep.artifacts["counts"]
    assert c["fail"] == 0
    assert c["pass"] == 6 and c["inconclusive"] == 3
    assert rep.verdict == "pass"
    assert len(rep.artifacts["pairs"]) == 9


def test_corollaries_for_distinct_bodies():
    grid = build_grid(2, 32)
    phi = field_from_terms([(2, 0, 1.0)], grid)
    h1 = theorem_family_body(phi, 0.5, 0.05)
    h2 = theorem_family_body(phi, 0.5, -0.05)
    reps = minkowski_corollaries(h1, h2, 0.5, refinement=2)
    assert [r.name for r in reps] == ["lp_minkowski", "log_minkowski"]
    assert all(r.verdict == "pass" for r in reps)
    assert [r.name for r in minkowski_corollaries(h1, h2, 0.0, refinement=2)] == ["log_minkowski"]


def test_corollaries_dilation_equality():
    cache: dict = {}
    h = ellipse(1.3, 1.0, 32)
    reps = minkowski_corollaries(h.scaled(1.4), h, 0.5, refinement=2, cache=cache)
    for r in reps:
        assert abs(r.margin) <= 3 * r.est_error
    assert len(cache) == 2
    log_rep = reps[1]
    assert_allclose(log_rep.lhs, math.log(1.4), rtol=1e-3)


def test_report_to_dict_is_plain():
    r = InequalityReport("x", {"p": 1.0}, np.float64(1.0), np.array([1.0, 2.0]), 0.5, 0.1, "pass")
    d = r.to_dict()
    assert d["rhs"] == [1.0, 2.0]
    assert type(d["lhs"]) is float
