import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from catlin_gh.errors import CapabilityError, CollarError, DomainMembershipError, OutOfChartError, SamplingError
from catlin_gh.geometry import (
    boundary_distance,
    cnorm,
    complex_step_jet,
    eval_jet,
    eval_r,
    hermitian,
    nearest_boundary_point,
    project_to_boundary,
    sample_boundary,
    sample_interior,
    tangent_split,
)
from oracles import egg_moduli_distance


def pt(a, b):
    return np.array([a, b], dtype=complex)


# -- defining function -------------------------------------------------------


def test_eval_r_examples(ball, egg2):
    assert eval_r(ball, pt(0, 0)) == pytest.approx(-1.0)
    assert eval_r(egg2, pt(0, 1)) == pytest.approx(0.0, abs=1e-15)
    assert eval_r(egg2, pt(0.5, 0.5)) == pytest.approx(-0.6875)


def test_eval_r_outside_bbox(ball):
    with pytest.raises(OutOfChartError):
        eval_r(ball, pt(3, 0))


def test_eval_jet_examples(ball, egg2):
    assert eval_jet(ball, pt(0.3, 0), 1, 0, 0, 0) == pytest.approx(0.3)
    assert eval_jet(egg2, pt(0, 0.5), 1, 1, 0, 0) == pytest.approx(0.0)
    z = pt(0.2 + 0.1j, -0.3j)
    assert eval_jet(egg2, z, 0, 0, 0, 0) == pytest.approx(eval_r(egg2, z))


def test_eval_jet_depth_limit(egg2):
    with pytest.raises(CapabilityError):
        eval_jet(egg2, pt(0, 0), 7, 0, 0, 0)


orders = st.tuples(*[st.integers(0, 2)] * 4).filter(lambda o: 1 <= sum(o) <= 2)
coords = st.floats(-0.5, 0.5)


@given(orders, coords, coords, coords, coords)
def test_jets_match_complex_step(egg2, o, a, b, c, d):
    z = pt(a + 1j * b, c + 1j * d)
    exact = eval_jet(egg2, z, *o)
    cs = complex_step_jet(egg2, z, *o)
    assert abs(exact - cs) <= 1e-8 * max(1.0, abs(exact))


# -- boundary distance and projection ---------------------------------------


def test_boundary_distance_examples(ball, egg2):
    assert boundary_distance(ball, pt(0, 0)) == pytest.approx(1.0, abs=1e-10)
    assert boundary_distance(ball, pt(0, 0.75)) == pytest.approx(0.25, abs=1e-10)
    assert boundary_distance(egg2, pt(0, 0.9)) == pytest.approx(0.1, abs=1e-10)


def test_boundary_distance_rejects_outside(ball):
    with pytest.raises(DomainMembershipError):
        boundary_distance(ball, pt(0.8, 0.8))


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi))
def test_egg_distance_matches_moduli_oracle(egg2, a, b, t1, t2):
    if a**4 + b**2 >= 1 - 1e-6:
        return
    z = pt(a * np.exp(1j * t1), b * np.exp(1j * t2))
    want = egg_moduli_distance(2, a, b)
    assert boundary_distance(egg2, z) == pytest.approx(want, rel=1e-6, abs=1e-10)


def test_distance_not_beyond_boundary_samples(egg3):
    z = sample_interior(egg3, 40, seed=5)
    d = boundary_distance(egg3, z)
    xi = sample_boundary(egg3, 4000, seed=1)
    brute = np.min(cnorm(z[:, None, :] - xi[None, :, :]), axis=1)
    assert np.all(d <= brute + 1e-9)


def test_projection_examples(ball, egg2):
    assert np.allclose(project_to_boundary(ball, pt(0, 0.75)), pt(0, 1))
    assert np.allclose(project_to_boundary(egg2, pt(0, 0.9)), pt(0, 1))
    th = np.pi / 3
    assert np.allclose(project_to_boundary(ball, pt(0.6 * np.exp(1j * th), 0)), pt(np.exp(1j * th), 0))


def test_projection_outside_collar(ball):
    with pytest.raises(CollarError):
        project_to_boundary(ball, pt(0, 0.1))


def test_projection_consistency_on_collar(egg2):
    z = sample_interior(egg2, 200, "dyadic-collar", seed=2, first_band=2)
    xi, d = nearest_boundary_point(egg2, z)
    assert np.all(np.abs(eval_r(egg2, xi)) <= 1e-10)
    assert np.allclose(cnorm(z - xi), d, rtol=1e-6)
    # z - xi parallel to the real gradient at xi
    g = egg2.dbar_r(xi)
    v = z - xi
    cross = np.abs(hermitian(v, g)) - cnorm(v) * cnorm(g)
    assert np.all(np.abs(cross) <= 1e-6 * cnorm(v) * cnorm(g))


# -- tangent split ----------------------------------------------------------


@pytest.mark.parametrize(
    "X, xh, xn",
    [((0, 1), (0, 0), (0, 1)), ((1, 0), (1, 0), (0, 0)), ((1, 1), (1, 0), (0, 1))],
)
def test_split_examples(ball, X, xh, xn):
    s = tangent_split(ball, pt(0, 0.5), np.array(X, dtype=complex))
    assert np.allclose(s.x_h, xh, atol=1e-12)
    assert np.allclose(s.x_n, xn, atol=1e-12)


vec = st.tuples(*[st.floats(-3, 3)] * 4).filter(lambda v: max(map(abs, v)) > 1e-3)


@given(st.integers(0, 10**6), vec)
def test_split_invariants(egg2, seed, v):
    z = sample_interior(egg2, 1, "dyadic-collar", seed=seed, bands=5, first_band=2)[0]
    X = np.array([v[0] + 1j * v[1], v[2] + 1j * v[3]])
    s = tangent_split(egg2, z, X)
    assert np.allclose(s.x_h + s.x_n, X, atol=1e-12)
    g = egg2.dbar_r(s.projection)
    assert abs(hermitian(s.x_h, g)) <= 1e-8 * cnorm(X) * cnorm(g)
    assert cnorm(s.x_h) ** 2 + cnorm(s.x_n) ** 2 == pytest.approx(cnorm(X) ** 2, rel=1e-10)


def test_split_extrapolation_flag(ball):
    s = tangent_split(ball, pt(0, 0.1), np.array([1, 1], dtype=complex), extrapolate=True)
    assert bool(s.extrapolated)
    with pytest.raises(CollarError):
        tangent_split(ball, pt(0, 0.1), np.array([1, 1], dtype=complex))


# -- sampling ---------------------------------------------------------------


def test_sample_interior_examples(ball, egg2):
    p = sample_interior(ball, 1, seed=3)
    assert eval_r(ball, p)[0] < 0
    z = sample_interior(egg2, 100, "dyadic-collar", seed=4, bands=5)
    d = boundary_distance(egg2, z)
    k = np.floor(-np.log2(d / egg2.inradius)).astype(int) - 1
    assert np.bincount(k, minlength=5)[:5].tolist() == [20] * 5
    with pytest.raises(SamplingError):
        sample_interior(ball, 0)


def test_sampling_is_seeded(egg3):
    a = sample_interior(egg3, 10, "dyadic-collar", seed=9)
    b = sample_interior(egg3, 10, "dyadic-collar", seed=9)
    assert np.array_equal(a, b)
    assert np.all(eval_r(egg3, a) < 0) and np.all(boundary_distance(egg3, a) > 0)
