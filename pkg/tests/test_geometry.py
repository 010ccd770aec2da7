import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pothull import Box, CostSpec, DomainError, PolyCurve, convex_c_omega, curve_bound_rhs, curve_stats, grid_path
from pothull.core import estimate_cost_constants, reduced_quadratic_constants
from pothull.experiments import grid_points
from pothull.geometry import SampledSet, chain_sum_points, hausdorff, hausdorff_report, validate_grid_path

from conftest import random_curve_draw
from oracles import grid_bfs


# Hausdorff distance --------------------------------------------------------


def test_hausdorff_examples():
    A = np.array([[0.0, 1.0], [2.0, -1.0]])
    assert hausdorff(A, A) == 0.0
    assert hausdorff([[0.0]], [[1.0]]) == 1.0
    for d in (1, 2, 3):
        for n in (1, 2, 5):
            G = grid_points(Box.unit(d), 1.0 / n)
            # Lattice {0, 1/n, ..., 1}^d: the farthest box points sit at cell centres.
            assert hausdorff(G, Box.unit(d)) == pytest.approx(np.sqrt(d) / (2 * n), abs=1e-12)


def test_hausdorff_errors_and_flags():
    with pytest.raises(DomainError):
        hausdorff(np.zeros((0, 2)), [[0.0, 0.0]])
    with pytest.raises(DomainError):
        hausdorff([[0.0]], [])
    rep = hausdorff_report([[0.0]], SampledSet(np.array([[0.0], [0.5], [1.0]]), 0.25))
    assert rep.resolution_limited and rep.resolution == 0.25
    assert rep.value == 1.0
    assert not hausdorff_report([[0.0]], Box.unit(1)).resolution_limited


def test_hausdorff_points_outside_box():
    box = Box([0.0, 0.0], [1.0, 1.0])
    # The far corner (1, 1) from the single atom (-1, 0).
    assert hausdorff([[-1.0, 0.0]], box) == pytest.approx(np.sqrt(5.0))
    assert hausdorff([[0.5, 3.0]], box) == pytest.approx(np.hypot(0.5, 3.0))


@given(st.integers(0, 10**6), st.integers(1, 8), st.integers(1, 3))
def test_box_hausdorff_against_dense_samples(seed, k, d):
    rng = np.random.default_rng(seed)
    box = Box(np.zeros(d), np.ones(d))
    A = rng.uniform(-0.2, 1.2, (k, d))
    exact = hausdorff(A, box)
    mesh = 0.05
    S = grid_points(box, mesh)
    sampled = hausdorff(A, S)
    # Sampling the box can only miss its farthest point by the covering radius.
    assert sampled <= exact + 1e-12
    assert exact <= sampled + np.sqrt(d) * mesh / 2 + 1e-12


@given(st.integers(0, 10**6))
def test_hausdorff_symmetric_for_point_sets(seed):
    rng = np.random.default_rng(seed)
    A, B = rng.random((5, 2)), rng.random((7, 2))
    assert hausdorff(A, B) == hausdorff(B, A) >= 0.0


def test_hausdorff_union_of_boxes():
    plus = [Box([-1.0, 0.0], [1.0, 0.0]), Box([0.0, -1.0], [0.0, 1.0])]
    assert hausdorff([[0.0, 0.0]], plus) == pytest.approx(1.0)
    ends = [[-1.0, 0.0], [1.0, 0.0], [0.0, -1.0], [0.0, 1.0]]
    assert hausdorff(ends, plus) == pytest.approx(1.0)


# grid paths ----------------------------------------------------------------


def test_grid_path_examples():
    sq = Box.unit(2)
    p = grid_path(sq, 0.5, [0.5, 0.5], [0.5, 0.5])
    assert p.points.shape[0] == 1 and p.direction_changes == 0
    p = grid_path(sq, 0.5, [0.0, 0.0], [1.0, 0.5])
    assert p.points.shape[0] == 4
    assert p.direction_changes <= 2 and p.max_step == 0.5
    assert validate_grid_path(p, sq, 0.5, max_changes=2) == []
    with pytest.raises(DomainError):
        grid_path(sq, 0.5, [0.25, 0.0], [1.0, 1.0])
    with pytest.raises(DomainError):
        grid_path(sq, 0.5, [0.0, 0.0], [1.5, 1.0])


@given(st.integers(1, 4), st.data())
def test_grid_path_three_dimensions_against_bfs(n, data):
    eps = 1.0 / n
    cube = Box.unit(3)
    ka = data.draw(st.lists(st.integers(0, n), min_size=3, max_size=3))
    kb = data.draw(st.lists(st.integers(0, n), min_size=3, max_size=3))
    a, b = np.array(ka) * eps, np.array(kb) * eps
    p = grid_path(cube, eps, a, b)
    assert validate_grid_path(p, cube, eps, max_changes=3) == []
    np.testing.assert_array_equal(p.points[0], a)
    np.testing.assert_array_equal(p.points[-1], b)
    assert p.points.shape[0] - 1 == grid_bfs(cube.lo, cube.hi, eps, a, b)


def test_validator_catches_bad_paths():
    sq = Box.unit(2)
    p = grid_path(sq, 0.25, [0.0, 0.0], [1.0, 1.0])
    bad = type(p)(p.points[::2], p.direction_changes, p.max_step, p.eps)
    assert validate_grid_path(bad, sq, 0.25, max_changes=2)
    zig = np.array([[0.0, 0.0], [0.25, 0.0], [0.25, 0.25], [0.5, 0.25]])
    assert validate_grid_path(type(p)(zig, 2, 0.25, 0.25), sq, 0.25, max_changes=1)


# curves --------------------------------------------------------------------


def test_curve_stats_examples():
    z0, z1 = np.array([0.2]), np.array([0.9])
    speed, tv = curve_stats(PolyCurve([z0, z1]))
    assert speed == pytest.approx(0.7) and tv == 0.0
    speed, tv = curve_stats(PolyCurve([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]))
    assert speed == 2.0
    assert tv == pytest.approx(2.0 * np.sqrt(2.0))
    stair = PolyCurve([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [2.0, 1.0]])
    v = 3.0 * np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
    _, tv = curve_stats(stair)
    assert tv == pytest.approx(np.linalg.norm(v[1] - v[0]) + np.linalg.norm(v[2] - v[1]))


def test_polycurve_validation():
    with pytest.raises(DomainError):
        PolyCurve([[0.0, 0.0]])
    with pytest.raises(DomainError):
        PolyCurve([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]])


def test_curve_bound_examples():
    curve = PolyCurve([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])
    n = 8
    atoms = curve(np.arange(n + 1) / n)
    Y = np.array([[0.0, 0.5], [1.0, 0.5]])
    b = curve_bound_rhs(curve, atoms, n, reduced_quadratic_constants(Y), asymmetric=True)
    assert b.approximation == 0.0 and b.holder == 0.0
    seg = PolyCurve([[0.0, 0.0], [1.0, 1.0]])
    k = estimate_cost_constants(CostSpec.quadratic(), Box.unit(2), Box.unit(2), 1.0)
    b = curve_bound_rhs(seg, seg(np.arange(5) / 4), 4, k)
    assert b.approximation == 0.0 and b.turning == 0.0
    assert b.total == b.speed + b.holder
    with pytest.raises(DomainError):
        curve_bound_rhs(seg, seg(np.arange(4) / 3), 4, k)


def test_curve_bound_monotone_in_n():
    curve = PolyCurve([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.3, 0.4]])
    k = estimate_cost_constants(CostSpec.quadratic(), Box.unit(2), Box.unit(2), 1.0)
    totals = [curve_bound_rhs(curve, curve(np.arange(n + 1) / n), n, k).total for n in range(1, 40)]
    assert all(b <= a + 1e-15 for a, b in zip(totals, totals[1:]))


@given(st.lists(st.integers(-5, 5), min_size=2, max_size=2), st.integers(1, 12), st.integers(0, 10**6))
def test_straight_bilinear_chain_telescopes(step, n, seed):
    rng = np.random.default_rng(seed)
    step = np.array(step, dtype=float)
    x0 = rng.integers(-5, 5, 2).astype(float)
    xs = x0 + np.arange(n + 1)[:, None] * step
    ys = rng.integers(-9, 9, (n + 1, 2)).astype(float)
    # Integer data keeps every partial sum exact in floating point.
    assert chain_sum_points(CostSpec.bilinear(), xs, ys) == float(step @ (ys[-1] - ys[0]))


def test_curve_chain_bound_random_draws():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        curve, atoms, ys, n, c, consts = random_curve_draw(rng)
        lhs = chain_sum_points(c, atoms, ys)
        assert lhs <= curve_bound_rhs(curve, atoms, n, consts).total + 1e-12


def test_convex_c_omega_examples():
    assert convex_c_omega([[0.3, 0.1]]) == 0.0
    assert convex_c_omega([[0.0], [1.0]]) == 1.0
    assert convex_c_omega([[0, 0], [0, 1], [1, 0], [1, 1]]) == pytest.approx(np.sqrt(2.0))
