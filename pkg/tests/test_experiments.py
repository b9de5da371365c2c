import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from catlin_gh.errors import PreconditionError
from catlin_gh.experiments import (
    DistanceTable,
    FitReport,
    ScaleFamily,
    degenerate_point,
    dg_residuals,
    exponent_regression,
    fit_constant,
    pool_pairs,
    proposition_ratio,
    relative_drift,
    sample_pairs,
    theorem_fin_residual,
    up_constant,
    verify_dg_sandwich,
    verify_up_bound,
)
from catlin_gh.geodesics import REAL_SLICE, GeodesicBudget
from catlin_gh.geometry import boundary_distance
from catlin_gh.metrics import MetricField
from oracles import ball_normal_distance


def test_fit_constant_examples():
    assert fit_constant([1.0, 3.0, 2.0]) == (3.0, 1)
    assert fit_constant([1.0, 3.0, 0.5], "min") == (0.5, 2)
    assert fit_constant([2.0, 2.0]) == (2.0, 0)
    with pytest.raises(PreconditionError):
        fit_constant([])
    with pytest.raises(ValueError):
        fit_constant([1.0], "mean")


def test_relative_drift():
    assert relative_drift(2.0, 2.0) == 0.0
    assert relative_drift(4.0, 5.0) == pytest.approx(0.2)
    assert relative_drift(5.0, 4.0) == pytest.approx(0.2)
    assert relative_drift(1.0, math.inf) == math.inf


@given(st.lists(st.floats(0.1, 100), min_size=1, max_size=4))
def test_stable_flag_follows_history(vals):
    rep = FitReport("c", "max", [(0.2 / 2**k, v) for k, v in enumerate(vals)], 10)
    assert rep.fitted_value == vals[-1]
    if len(vals) < 2:
        assert not rep.stable
    else:
        assert rep.stable == (relative_drift(vals[-2], vals[-1]) < 0.2)
    d = rep.to_dict()
    assert d["stable"] == rep.stable and d["fitted_value"] == rep.fitted_value


def test_pool_pairs():
    p = pool_pairs(11, 20, seed=3)
    assert p.shape == (20, 2)
    assert np.all(p[:, 0] < p[:, 1]) and p.min() >= 1 and p.max() <= 10
    assert len({tuple(r) for r in p}) == 20
    assert np.array_equal(p, pool_pairs(11, 20, seed=3))
    with pytest.raises(PreconditionError):
        pool_pairs(5, 7, seed=0)


def test_sample_pairs_deterministic(egg2):
    a = sample_pairs(egg2, 12, seed=7)
    b = sample_pairs(egg2, 12, seed=7)
    assert [p.to_dict() for p in a] == [p.to_dict() for p in b]
    tags = [p.tag for p in a]
    assert tags.count("straddle") == 3 and tags.count("collar") == 9
    z = np.array([q for p in a for q in (p.x, p.y)])
    assert np.all(egg2.contains(z))
    assert np.all(np.abs(z.imag) == 0)  # real slice


def test_straddle_pairs_sit_at_maximal_type(egg2):
    xi = degenerate_point(egg2)
    assert np.allclose(xi, [0, 1])
    for p in sample_pairs(egg2, 8, seed=1, straddle_fraction=1.0):
        mid = 0.5 * (p.x + p.y)
        assert abs(mid[0]) < 1e-12  # symmetric about the z2 axis


def test_dg_residual_examples():
    lo, up = dg_residuals(np.array([math.log(4.0)]), np.array([0.4]), np.array([0.1]), np.array([0.3]))
    assert lo[0] == pytest.approx(0.0, abs=1e-15)
    assert up[0] == pytest.approx(math.log(4.0) - 2 * math.log(1 + 0.3 / 0.2))


@given(st.floats(0.01, 0.5), st.floats(1.1, 20))
def test_up_constant_radial_ball_closed_form(t2, ratio):
    # radial ball pair with normal distance log(t1/t2): C = sqrt(t1)/(sqrt(t1)+sqrt(t2))
    t1 = t2 * ratio
    d = ball_normal_distance(t1, t2)
    got = up_constant(d, t1, t2, t1 - t2)
    assert got == pytest.approx(math.sqrt(t1) / (math.sqrt(t1) + math.sqrt(t2)), rel=1e-10)
    assert got < 1


def test_up_constant_zero_distance():
    assert up_constant(0.0, 0.2, 0.3, 0.1) == 0.0


def fake_tables():
    pts = np.array([[0, 0], [0, 0.9], [0, 0.5], [0.3, 0.8]], dtype=complex)
    depth = 1 - np.sqrt((np.abs(pts) ** 2).sum(axis=1))
    d = np.abs(np.log(depth[:, None] / depth[None])) + 0.1 * (1 - np.eye(4))
    t = {0.2: DistanceTable(0.2, 1e-3, pts, depth, d + 0.05 * (1 - np.eye(4))),
         0.1: DistanceTable(0.1, 1e-3, pts, depth, d)}
    return t, np.array([[1, 2], [1, 3], [2, 3]])


def test_table_fits_against_direct_evaluation():
    tables, idx = fake_tables()
    rep = verify_dg_sandwich(tables, idx)
    assert [h for h, _ in rep.per_resolution] == [0.2, 0.1]
    t = tables[0.1]
    i, j = idx.T
    sep = np.abs(t.points[i] - t.points[j])
    sep = np.sqrt((sep**2).sum(axis=1))
    lo, up = dg_residuals(t.dist[i, j], t.depth[i], t.depth[j], sep)
    assert rep.fitted_value == pytest.approx(max(0.0, lo.max(), up.max()))
    up_rep = verify_up_bound(tables, idx)
    assert up_rep.fitted_value == pytest.approx(up_constant(t.dist[i, j], t.depth[i], t.depth[j], sep).max())
    assert up_rep.extra["distance_scale"] == 0.5
    assert up_rep.worst_case["scaled_distance"] == pytest.approx(0.5 * up_rep.worst_case["distance"])


def test_theorem_fin_residual_example():
    # L = 0.5, dx = dy = 0.01, beta = 1/2: 2 log(0.25 / 0.01) - 3
    assert theorem_fin_residual(3.0, 0.5, 0.01, 0.01, 0.5) == pytest.approx(2 * math.log(25) - 3)


def test_proposition_ratio_example():
    assert proposition_ratio(0.04, 0.5, 1.0, 0.5) == pytest.approx(0.2 * math.log(4.0) / 0.5)


def test_scale_family_geometry(egg2):
    fam = ScaleFamily(degenerate_point(egg2), j_min=2, j_max=5)
    pairs = fam.pairs(egg2)
    assert [p.pid for p in pairs] == ["s02", "s03", "s04", "s05"]
    for p, s in zip(pairs, fam.scales):
        assert p.separation == pytest.approx(s)
        assert boundary_distance(egg2, p.x[None])[0] == pytest.approx(0.25 * s, rel=0.2)
    rad = ScaleFamily(degenerate_point(egg2), normal=True).pairs(egg2)
    assert all(p.tag == "normal" and p.separation == pytest.approx(s) for p, s in zip(rad, fam.scales))


def test_exponent_needs_four_scales(egg2):
    fam = ScaleFamily(degenerate_point(egg2), j_min=2, j_max=4)
    m = MetricField("catlin_patched", egg2)
    with pytest.raises(PreconditionError):
        exponent_regression(egg2, m, fam, GeodesicBudget(h=0.2, frame=REAL_SLICE))
