import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from catlin_gh.errors import CapabilityError, ChartError
from catlin_gh.geometry import boundary_distance, cnorm, sample_interior
from catlin_gh.metrics import (
    CapWindow,
    MetricField,
    catlin_coefficients,
    catlin_metric,
    catlin_metric_split,
    comparison_metrics,
    frame_basis_coefficients,
    patched_metric,
    seam_constant,
    vector_field_L1,
    write_metric_samples,
)
from oracles import ball_r, egg_r, levi_coefficients, levi_C


def pt(a, b):
    return np.array([a, b], dtype=complex)


def top_chart(dom):
    return next(c for c in dom.charts if np.allclose(c.center, [0, 1]))


def collar(dom, n, seed):
    return sample_interior(dom, n, "dyadic-collar", seed=seed, bands=5, first_band=2)


# -- L1 ---------------------------------------------------------------------


def test_L1_examples(ball, egg2):
    assert np.allclose(vector_field_L1(ball, top_chart(ball), pt(0, 0.5)), [1, 0])
    assert np.allclose(vector_field_L1(egg2, top_chart(egg2), pt(0, 0.3)), [1, 0])
    assert np.allclose(vector_field_L1(ball, top_chart(ball), pt(0.5, 0.5)), [1, -1])


def test_L1_annihilates_r(egg2):
    ch = top_chart(egg2)
    z = collar(egg2, 400, 1)
    z = z[ch.contains(z, egg2)]
    L1 = vector_field_L1(egg2, ch, z)
    Lr = np.sum(L1 * egg2.d_r(z), axis=-1)
    assert np.max(np.abs(Lr)) <= 1e-8


def test_chart_error_where_normal_derivative_vanishes(ball):
    with pytest.raises(ChartError):
        vector_field_L1(ball, top_chart(ball), pt(0.6, 0))


# -- Levi coefficients against the symbolic oracle --------------------------


@pytest.mark.parametrize("t", [0.1, 0.5, 0.95])
def test_coefficients_on_egg_axis(egg2, egg3, ball, t):
    c = catlin_coefficients(egg2, top_chart(egg2), pt(0, t)).values
    assert abs(c[2]) < 1e-8 and abs(c[3]) < 1e-8 and abs(c[4] - 4) < 1e-8
    c3 = catlin_coefficients(egg3, top_chart(egg3), pt(0, t)).values
    assert max(abs(c3[l]) for l in range(2, 6)) < 1e-8 and abs(c3[6] - 36) < 1e-8
    assert abs(catlin_coefficients(ball, top_chart(ball), pt(0, t)).values[2] - 1) < 1e-8


def test_vanishing_order_formula(egg2, egg3):
    from math import factorial

    for dom, m in ((egg2, 2), (egg3, 3)):
        sym = levi_C(egg_r(m), 2 * m, (0, 0.4))
        got = catlin_coefficients(dom, top_chart(dom), pt(0, 0.4)).values
        assert got[2 * m] == pytest.approx(m**2 * factorial(m - 1) ** 2, abs=1e-8)
        assert got[2 * m] == pytest.approx(sym[2 * m], abs=1e-8)


def test_type_witness(egg2):
    raw = catlin_coefficients(egg2, top_chart(egg2), pt(0, 0.8)).raw
    assert any(abs(raw[(j, 4 - j)]) > 0 for j in range(1, 4))


def test_raw_coefficients_match_symbolic_off_axis(egg2, ball):
    for dom, r, up in ((egg2, egg_r(2), 4), (ball, ball_r(), 2)):
        ch = top_chart(dom)
        z = collar(dom, 60, 3)
        z = z[ch.contains(z, dom)][:4]
        for p in z:
            want = levi_coefficients(r, up, p)
            got = catlin_coefficients(dom, ch, p).raw
            for key, v in want.items():
                assert abs(complex(got[key]) - v) <= 1e-8 * max(1.0, abs(v)), key


def test_coefficient_depth_limits(egg2):
    with pytest.raises(Exception):
        catlin_coefficients(egg2, top_chart(egg2), pt(0, 0.5), up_to=5)
    with pytest.raises(CapabilityError):
        catlin_coefficients(egg2, top_chart(egg2), pt(0, 0.5), up_to=7)


# -- metric values ----------------------------------------------------------


@pytest.mark.parametrize("t", [0.05, 0.2, 0.5])
def test_catlin_metric_examples(ball, egg2, t):
    z = pt(0, 1 - t)
    assert catlin_metric(ball, top_chart(ball), z, pt(0, 1)) == pytest.approx(1 / (2 * t - t * t), rel=1e-10)
    want = (4 / (2 * t - t * t)) ** 0.25
    assert catlin_metric(egg2, top_chart(egg2), z, pt(1, 0)) == pytest.approx(want, rel=1e-10)
    assert catlin_metric(egg2, top_chart(egg2), z, pt(0, 0)) == 0.0


@pytest.mark.parametrize("t", [0.05, 0.2])
def test_split_metric_examples(ball, t):
    z = pt(0, 1 - t)
    assert catlin_metric_split(ball, top_chart(ball), z, pt(0, 1)) == pytest.approx(1 / t, rel=1e-10)
    assert catlin_metric_split(ball, top_chart(ball), z, pt(1, 0)) == pytest.approx(t**-0.5, rel=1e-10)


def test_split_metric_comparable_to_catlin_metric(egg2):
    ch = top_chart(egg2)
    z = collar(egg2, 300, 4)
    z = z[ch.contains(z, egg2)]
    rng = np.random.default_rng(1)
    X = rng.standard_normal((len(z), 2)) + 1j * rng.standard_normal((len(z), 2))
    ratio = catlin_metric_split(egg2, ch, z, X) / catlin_metric(egg2, ch, z, X)
    assert np.all(np.isfinite(ratio))
    c = max(ratio.max(), 1 / ratio.min())
    assert c < 10


def test_patched_is_max_over_charts(egg2):
    z = collar(egg2, 60, 5)
    z = z[boundary_distance(egg2, z) < egg2.collar_eps]
    X = np.tile(pt(0.6, 0.8j), (len(z), 1))
    got = patched_metric(egg2, z, X)
    for i, p in enumerate(z):
        vals = [catlin_metric_split(egg2, c, p, X[i]) for c in egg2.charts if c.contains(p, egg2)]
        assert vals
        assert got[i] == pytest.approx(max(vals), rel=1e-9)
        assert all(got[i] >= v - 1e-12 for v in vals)


def test_deep_interior_matches_seam_constant(ball):
    v = patched_metric(ball, pt(0, 0), pt(1, 0))
    c = seam_constant(ball)
    assert v == pytest.approx(c)
    assert 0.5 <= v / c <= 2


def test_comparison_examples(egg2):
    t = 0.1
    z = pt(0, 1 - t)
    lo, up = comparison_metrics(egg2, z, pt(0, 2))
    assert lo == pytest.approx(20) and up == pytest.approx(20)
    lo, up = comparison_metrics(egg2, z, pt(1, 0))
    assert lo == pytest.approx(t**-0.25) and up == pytest.approx(t**-0.5)
    assert comparison_metrics(egg2, z, pt(0, 0)) == (0.0, 0.0)


def test_sandwich_constant_is_bounded_and_stable(egg2):
    def fitted(n, seed):
        z = collar(egg2, n, seed)
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((n, 2)) + 1j * rng.standard_normal((n, 2))
        k = patched_metric(egg2, z, X)
        lo, up = comparison_metrics(egg2, z, X)
        return max(np.max(lo / k), np.max(k / up))

    c1, c2 = fitted(300, 11), fitted(600, 11)
    assert c1 <= 50 and c2 <= 50
    assert abs(c2 - c1) / c1 < 0.2


# -- MetricField ------------------------------------------------------------


kinds = st.sampled_from(["catlin_patched", "lower_comparison", "upper_comparison", "normal_only", "euclidean"])


@given(kinds, st.integers(0, 10**6), st.floats(-4, 4), st.floats(-4, 4))
def test_homogeneity(egg2, kind, seed, a, b):
    if abs(a) + abs(b) < 1e-6:
        return
    m = MetricField(kind, egg2)
    rng = np.random.default_rng(seed)
    z = sample_interior(egg2, 1, "dyadic-collar", seed=seed)[0]
    X = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    t = a + 1j * b
    base = m(z, X)
    assert base > 0
    assert abs(m(z, t * X) - abs(t) * base) <= 1e-10 * abs(t) * base


def test_basis_reconstruction(egg2):
    ch = top_chart(egg2)
    z = collar(egg2, 200, 6)
    z = z[ch.contains(z, egg2)]
    rng = np.random.default_rng(2)
    X = rng.standard_normal((len(z), 2)) + 1j * rng.standard_normal((len(z), 2))
    b1, b2 = frame_basis_coefficients(egg2, ch, z, X)
    L1 = vector_field_L1(egg2, ch, z)
    L2 = ch.frame.conj().T @ np.array([0, 1])
    back = b1[:, None] * L1 + b2[:, None] * L2
    assert np.max(cnorm(back - X) / cnorm(X)) <= 1e-10


def test_local_metric_needs_chart(egg2):
    with pytest.raises(ValueError):
        MetricField("catlin_local", egg2)
    m = MetricField("catlin_local", egg2, chart=top_chart(egg2))
    assert m(pt(0, 0.9), pt(0, 1)) == pytest.approx(10.0, rel=1e-8)


def test_window_dominates_pointwise(egg2):
    win = CapWindow(pt(0, 1), 0.5)
    base = MetricField("catlin_patched", egg2)
    inter = MetricField("catlin_patched", egg2, window=win)
    z = collar(egg2, 400, 8)
    z = z[win.distance(z) > 0]
    rng = np.random.default_rng(3)
    X = rng.standard_normal((len(z), 2)) + 1j * rng.standard_normal((len(z), 2))
    assert np.all(base(z, X) <= inter(z, X))
    assert np.all(inter.delta(z) <= base.delta(z))


def test_metric_sample_csv(tmp_path, egg2):
    m = MetricField("catlin_patched", egg2)
    z = collar(egg2, 5, 1)
    X = np.ones((5, 2), dtype=complex)
    path = tmp_path / "s.csv"
    write_metric_samples(path, m, z, X)
    rows = list(csv.DictReader(path.open()))
    assert [int(r["index"]) for r in rows] == list(range(5))
    assert {"kind", "value", "delta", "C_2", "C_4"} <= set(rows[0])
    assert np.allclose([float(r["value"]) for r in rows], m(z, X))
