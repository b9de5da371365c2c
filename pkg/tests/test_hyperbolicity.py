import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from catlin_gh.curves import PolylineCurve
from catlin_gh.errors import PreconditionError
from catlin_gh.geodesics import REAL_SLICE, GeodesicBudget, GraphDistance, build_graded_graph
from catlin_gh.hyperbolicity import (
    estimate_delta,
    four_point_defect,
    gromov_product,
    hausdorff_distance,
    min_gromov_product,
    stability_check,
)
from catlin_gh.metrics import MetricField
from oracles import four_point_delta


def euclid(p, q):
    return float(np.linalg.norm(np.asarray(p) - np.asarray(q)))


def matrix_oracle(d):
    d = np.asarray(d, dtype=float)
    return lambda i, j: float(d[int(np.real(i[0])), int(np.real(j[0]))])


def as_points(n):
    return np.array([[i, 0] for i in range(n)], dtype=complex)


# -- Gromov products ----------------------------------------------------------


@given(st.lists(st.floats(-5, 5), min_size=6, max_size=6))
def test_gromov_product_identities(v):
    x, y, w = np.array(v[:2]), np.array(v[2:4]), np.array(v[4:])
    assert gromov_product(euclid, x, x, w) == pytest.approx(euclid(x, w))
    assert gromov_product(euclid, x, w, w) == pytest.approx(0.0, abs=1e-12)
    assert gromov_product(euclid, x, y, w) == gromov_product(euclid, y, x, w)
    assert gromov_product(euclid, x, y, w) >= -1e-12


def test_tree_metric_is_zero_hyperbolic():
    # star with leaf weights 1, 2, 3, 4
    w = [1, 2, 3, 4]
    d = np.array([[0 if i == j else w[i] + w[j] for j in range(4)] for i in range(4)], float)
    rep = estimate_delta(matrix_oracle(d), as_points(4), 50, seed=1, distances=d)
    assert rep.delta_est == 0.0
    assert four_point_delta(d) == 0.0


def test_square_matches_bruteforce():
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
    d = np.linalg.norm(sq[:, None] - sq[None], axis=-1)
    rep = estimate_delta(matrix_oracle(d), as_points(4), 200, seed=0, distances=d)
    want = four_point_delta(d)
    assert want > 0
    assert rep.delta_est == pytest.approx(want, rel=1e-12)
    assert len(rep.worst_quadruple) == 4


@given(st.integers(5, 9), st.integers(0, 1000))
def test_estimate_never_exceeds_bruteforce(n, seed):
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((n, 3))
    d = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    rep = estimate_delta(matrix_oracle(d), as_points(n), 60, seed=seed, distances=d)
    assert 0.0 <= rep.delta_est <= four_point_delta(d) + 1e-12
    assert rep.min_gromov_product >= -1e-12


def test_monotone_in_budget():
    rng = np.random.default_rng(4)
    pts = rng.standard_normal((12, 2))
    d = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    near = np.arange(12) < 6
    vals = [estimate_delta(None, as_points(12), b, seed=3, near=near, distances=d).delta_est
            for b in (1, 5, 20, 100)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    rep = estimate_delta(None, as_points(12), 10, seed=3, near=near, distances=d)
    assert rep.basepoint_policy == "stratified-pool" and rep.strata == {"near": 6, "far": 6}


def test_duplicates_are_harmless():
    pts = np.array([[0, 0], [0, 0], [1, 0], [0, 2]], dtype=complex)
    rep = estimate_delta(euclid, pts, 100, seed=0)
    d = np.linalg.norm(pts.real[:, None] - pts.real[None], axis=-1)
    defect = four_point_defect(d, np.array([[0, 1, 2, 3], [1, 0, 0, 3]]))
    assert np.all(np.isfinite(defect))
    assert rep.delta_est == pytest.approx(four_point_delta(d))


def test_estimate_preconditions():
    with pytest.raises(PreconditionError):
        estimate_delta(euclid, np.zeros((3, 2)), 10)
    with pytest.raises(PreconditionError):
        estimate_delta(euclid, np.zeros((5, 2)), 0)


def test_min_gromov_product_detects_triangle_failure():
    d = np.array([[0, 1, 5], [1, 0, 1], [5, 1, 0]], float)
    assert min_gromov_product(d) < 0


# -- Hausdorff distance -------------------------------------------------------


def segment(a, b):
    return PolylineCurve.from_points(np.array([a, b], dtype=complex))


def test_hausdorff_identical_and_symmetric():
    a = segment([0, 0.1], [0, 0.6])
    b = segment([0.05, 0.1], [0.2, 0.5])
    assert hausdorff_distance(euclid, a, a) == 0.0
    assert hausdorff_distance(euclid, a, b) == hausdorff_distance(euclid, b, a)


def test_hausdorff_parallel_normal_segments(ball):
    t = 0.1
    # radial segments of equal length at depths t and 2t, offset tangentially
    a = segment([0.0, 1 - t - 0.3], [0.0, 1 - t])
    b = segment([0.1, 1 - 2 * t - 0.3], [0.1, 1 - 2 * t])
    m = MetricField("catlin_patched", ball)
    g = build_graded_graph(ball, m, 0.2, 0.02, REAL_SLICE)
    oracle = GraphDistance(g)
    got = hausdorff_distance(oracle, a, b, 9)
    qa, qb = a.at(np.linspace(0, 1, 9)), b.at(np.linspace(0, 1, 9))
    ta, tb = a.at(np.linspace(0, 1, 33)), b.at(np.linspace(0, 1, 33))
    brute = max(max(min(oracle(p, q) for q in tb) for p in qa), max(min(oracle(p, q) for q in ta) for p in qb))
    assert got > 0
    assert got == pytest.approx(brute, rel=1e-9)


def test_hausdorff_refinement_is_monotone():
    a = segment([0, 0.1], [0, 0.6])
    b = PolylineCurve.from_points(np.array([[0.05, 0.1], [0.2, 0.3], [0.0, 0.55]], dtype=complex))
    vals = [hausdorff_distance(euclid, a, b, 9, targets_per_curve=m) for m in (3, 5, 9, 17, 33)]
    assert all(y <= x + 1e-15 for x, y in zip(vals, vals[1:]))


# -- stability ----------------------------------------------------------------


def test_stability_lambda_one_is_zero(ball):
    m = MetricField("catlin_patched", ball)
    budget = GeodesicBudget(h=0.2, frame=REAL_SLICE)
    x, y = np.array([-0.5, 0.7], dtype=complex), np.array([0.5, 0.7], dtype=complex)
    assert stability_check(ball, m, x, y, 1.0, budget) == 0.0


def test_stability_detour_reaches_target(ball):
    m = MetricField("catlin_patched", ball)
    budget = GeodesicBudget(h=0.2, frame=REAL_SLICE)
    x, y = np.array([-0.5, 0.7], dtype=complex), np.array([0.5, 0.7], dtype=complex)
    res = stability_check(ball, m, x, y, 1.5, budget, return_info=True)
    assert abs(res.lambda_achieved - 1.5) <= 0.2 * 1.5
    assert res.R_est > 0 and np.isfinite(res.R_est)
    with pytest.raises(PreconditionError):
        stability_check(ball, m, x, y, 0.5, budget)
