import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from catlin_gh.curves import (
    PolylineCurve,
    concatenate,
    euclidean_length,
    finsler_length,
    max_boundary_distance,
    read_curve_csv,
    resample,
    write_curve_csv,
)
from catlin_gh.errors import CurveValidityError
from catlin_gh.metrics import MetricField
from oracles import ball_normal_distance


def radial(a, b, n=2):
    return PolylineCurve.from_points([[0, v] for v in np.linspace(a, b, n)])


def test_euclidean_length_examples():
    x, y = np.array([0, 0.1j]), np.array([0.3, 0.5])
    assert euclidean_length(PolylineCurve.from_points([x, y])) == pytest.approx(np.linalg.norm([0.3, 0.1, 0.5]))
    assert euclidean_length(radial(0.1, 0.7, 3)) == pytest.approx(0.6)
    sq = PolylineCurve.from_points([[0, 0], [0.1, 0], [0.1, 0.1], [0.2, 0.1], [0.2, 0.2]])
    assert euclidean_length(sq) == pytest.approx(0.4)


def test_curve_validation(ball):
    with pytest.raises(CurveValidityError):
        PolylineCurve.from_points([[0, 0]])
    with pytest.raises(CurveValidityError):
        PolylineCurve(np.array([[0, 0], [0, 0.1]]), np.array([0.0, 0.5]))
    with pytest.raises(CurveValidityError):
        PolylineCurve(np.array([[0, 0], [0, 0], [0, 0.1]]), np.array([0.0, 0.5, 1.0]))
    with pytest.raises(CurveValidityError):
        PolylineCurve.from_points([[0, 0.5], [0, 1.02]]).validate(ball)
    PolylineCurve.from_points([[0.99, 0], [0, 0.99]]).validate(ball)


@pytest.mark.parametrize("t1, t2", [(0.5, 0.1), (0.3, 0.01), (0.8, 0.4)])
def test_normal_segment_log_ratio(ball, t1, t2):
    m = MetricField("normal_only", ball)
    got = finsler_length(m, radial(1 - t1, 1 - t2))
    assert got == pytest.approx(ball_normal_distance(t1, t2), rel=1e-3)


def test_constant_metric_reduces_to_euclidean(egg2):
    m = MetricField("euclidean", egg2)
    c = PolylineCurve.from_points([[0, 0], [0.2, 0.1j], [0.3j, 0.4]])
    assert finsler_length(m, c) == pytest.approx(euclidean_length(c))


def test_reversal_symmetry(egg2):
    m = MetricField("catlin_patched", egg2)
    c = PolylineCurve.from_points([[0.1, 0.2], [0.3, 0.8], [0.05j, 0.95]])
    assert finsler_length(m, c.reversed()) == pytest.approx(finsler_length(m, c), rel=1e-12)


def test_max_boundary_distance_examples(ball):
    assert max_boundary_distance(radial(0.2, 0.9), ball) == pytest.approx(0.8, rel=1e-9)
    flat = PolylineCurve.from_points([[0.3, 0], [0, 0.3]])
    d = 1 - 0.3 * math.sqrt(0.5)  # deepest at the chord midpoint
    assert max_boundary_distance(flat, ball) == pytest.approx(d, rel=1e-4)
    assert max_boundary_distance(radial(-0.5, 0.5), ball) == pytest.approx(1.0, rel=1e-9)
    shallow = PolylineCurve.from_points([[0.6, 0], [0.6j, 0]])
    assert max_boundary_distance(shallow, ball) == pytest.approx(1 - 0.6 * math.sqrt(0.5), rel=1e-4)


def test_resample_examples():
    c = PolylineCurve.from_points([[0, 0], [0, 1]])
    assert len(resample(c, 0.25).points) == 5
    fine = resample(c, 0.25)
    assert resample(fine, 0.3) is fine
    assert resample(c, 2.0) is c
    with pytest.raises(ValueError):
        resample(c, 0.0)


coord = st.floats(-0.35, 0.35)
point = st.tuples(coord, coord, coord, coord).map(lambda v: [v[0] + 1j * v[1], v[2] + 1j * v[3]])


@given(st.lists(point, min_size=2, max_size=6, unique_by=lambda p: tuple(p)), st.floats(0.02, 0.5))
def test_resample_invariants(pts, step):
    arr = np.array(pts)
    if np.any(np.linalg.norm(np.diff(arr, axis=0), axis=1) < 1e-9):
        return
    c = PolylineCurve.from_points(arr)
    r = resample(c, step)
    assert np.all(np.abs(np.diff(r.points, axis=0)).sum(axis=1) >= 0)
    assert np.max(np.linalg.norm(np.diff(r.points, axis=0), axis=1)) <= step + 1e-12
    assert np.allclose(r.points[[0, -1]], c.points[[0, -1]])
    assert euclidean_length(r) == pytest.approx(euclidean_length(c), rel=1e-12)
    assert euclidean_length(c) >= np.linalg.norm(arr[0] - arr[-1]) - 1e-12


@given(st.lists(point, min_size=3, max_size=5, unique_by=lambda p: tuple(p)))
def test_finsler_additive_and_refinement_stable(egg2, pts):
    arr = np.array(pts)
    if np.any(np.linalg.norm(np.diff(arr, axis=0), axis=1) < 1e-3):
        return
    c = PolylineCurve.from_points(arr)
    m = MetricField("catlin_patched", egg2)
    a = PolylineCurve.from_points(arr[:2])
    b = PolylineCurve.from_points(arr[1:])
    total = finsler_length(m, c)
    assert finsler_length(m, concatenate(a, b)) == pytest.approx(total, rel=1e-9)
    assert finsler_length(m, a) + finsler_length(m, b) == pytest.approx(total, rel=1e-9)
    assert finsler_length(m, resample(c, 0.05)) == pytest.approx(total, rel=1e-3)


def test_curve_csv_roundtrip(tmp_path, egg2):
    c = PolylineCurve.from_points([[0.1, 0.2], [0.3, 0.8], [0.05j, 0.95]])
    p = write_curve_csv(c, egg2, tmp_path / "c.csv")
    back = read_curve_csv(p)
    assert np.array_equal(back.points, c.points) and np.array_equal(back.params, c.params)
