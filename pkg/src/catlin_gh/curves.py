"""Polyline curves in a domain: Euclidean and Finsler lengths, the maximal
boundary distance along a curve, resampling and CSV dumps."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CatlinError, CurveValidityError
from .geometry import DomainModel, cnorm, nearest_boundary_point

QUAD_RTOL = 1e-4
MAX_LEVEL = 12  # doublings beyond the starting density
MAX_PIECE = 1.0 / 32  # Euclidean length of the coarsest sub-piece


@dataclass(frozen=True)
class PolylineCurve:
    """Ordered vertices ``points`` (complex, shape ``(n, 2)``) with parameters in [0, 1]."""

    points: np.ndarray
    params: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex)
        par = np.asarray(self.params, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
            raise CurveValidityError("a curve needs at least two points of shape (2,)")
        if par.shape != (len(pts),):
            raise CurveValidityError("params must match points")
        if not (np.all(np.isfinite(pts.view(float))) and np.all(np.isfinite(par))):
            raise CurveValidityError("non-finite vertex or parameter")
        if np.any(np.diff(par) <= 0) or par[0] != 0.0 or par[-1] != 1.0:
            raise CurveValidityError("params must increase strictly from 0 to 1")
        if np.any(cnorm(np.diff(pts, axis=0)) == 0):
            raise CurveValidityError("consecutive vertices coincide")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "params", par)

    @classmethod
    def from_points(cls, points, params=None) -> "PolylineCurve":
        """Build a curve; without ``params`` the chord-length parameterization is used."""
        pts = np.asarray(points, dtype=complex)
        if params is None:
            s = np.concatenate([[0.0], np.cumsum(cnorm(np.diff(pts, axis=0)))])
            if len(pts) < 2 or s[-1] == 0:
                raise CurveValidityError("degenerate curve")
            params = s / s[-1]
            params[-1] = 1.0
        return cls(pts, np.asarray(params, dtype=float))

    @property
    def n_segments(self) -> int:
        return len(self.points) - 1

    @property
    def chords(self) -> np.ndarray:
        return np.diff(self.points, axis=0)

    def reversed(self) -> "PolylineCurve":
        return PolylineCurve(self.points[::-1].copy(), (1.0 - self.params[::-1]).copy())

    def at(self, t) -> np.ndarray:
        """Piecewise-linear evaluation at parameters ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        i = np.clip(np.searchsorted(self.params, t, side="right") - 1, 0, self.n_segments - 1)
        w = (t - self.params[i]) / (self.params[i + 1] - self.params[i])
        return self.points[i] + w[:, None] * (self.points[i + 1] - self.points[i])

    def with_params(self, params) -> "PolylineCurve":
        return PolylineCurve(self.points, params)

    def validate(self, domain: DomainModel) -> None:
        """Vertices and chord midpoints must lie in the domain."""
        mids = 0.5 * (self.points[1:] + self.points[:-1])
        bad_v = np.flatnonzero(~domain.contains(self.points))
        if len(bad_v):
            raise CurveValidityError(f"vertex {bad_v[0]} lies outside {domain.name}")
        bad_m = np.flatnonzero(~domain.contains(mids))
        if len(bad_m):
            raise CurveValidityError(f"segment {bad_m[0]} leaves {domain.name}")


def concatenate(a: PolylineCurve, b: PolylineCurve) -> PolylineCurve:
    """Join ``a`` then ``b``; the shared endpoint is kept once."""
    if not np.allclose(a.points[-1], b.points[0], atol=1e-12):
        raise CurveValidityError("curves do not share an endpoint")
    return PolylineCurve.from_points(np.concatenate([a.points, b.points[1:]]))


def euclidean_length(curve: PolylineCurve) -> float:
    return float(np.sum(cnorm(curve.chords)))


def _sub_midpoints(p0, p1, n):
    # midpoints of n equal pieces of each chord, shape (segments, n, 2)
    w = (np.arange(n) + 0.5) / n
    return p0[:, None, :] + w[None, :, None] * (p1 - p0)[:, None, :]


def _eval_segments(metric, pts, vec, seg_ids):
    try:
        return metric(pts, vec)
    except CatlinError as exc:
        # locate the first failing segment for the error message
        for i in np.unique(seg_ids):
            try:
                metric(pts[seg_ids == i], vec[seg_ids == i])
            except CatlinError:
                exc.args = (f"segment {int(i)}: {exc.args[0] if exc.args else exc}",) + exc.args[1:]
                exc.segment = int(i)
                raise exc
        raise


def chord_lengths(metric, p0, p1, rtol: float = QUAD_RTOL) -> np.ndarray:
    """Finsler length of independent chords p0[i] -> p1[i] by the midpoint rule
    with adaptive bisection.

    Each chord starts with pieces no longer than ``MAX_PIECE``; the number of
    pieces doubles until the estimate changes by less than ``rtol`` relative
    on two successive doublings.
    """
    p0 = np.asarray(p0, dtype=complex)
    p1 = np.asarray(p1, dtype=complex)
    chords = p1 - p0
    nseg = len(chords)
    est = np.zeros(nseg)
    calm = np.zeros(nseg, dtype=bool)  # previous doubling already agreed
    fresh = np.ones(nseg, dtype=bool)
    with np.errstate(divide="ignore"):
        level = np.clip(np.ceil(np.log2(cnorm(chords) / MAX_PIECE)), 0, MAX_LEVEL).astype(int) if nseg else np.zeros(0, int)
    stop = level + MAX_LEVEL
    active = np.arange(nseg)
    while len(active):
        for lv in np.unique(level[active]):
            idx = active[level[active] == lv]
            n = 2**int(lv)
            pts = _sub_midpoints(p0[idx], p1[idx], n).reshape(-1, 2)
            vec = np.repeat(chords[idx], n, axis=0)
            vals = _eval_segments(metric, pts, vec, np.repeat(idx, n)).reshape(len(idx), n)
            new = vals.mean(axis=1)
            ok = ~fresh[idx] & (np.abs(new - est[idx]) <= rtol * np.maximum(np.abs(new), 1e-300))
            # one agreement can be a plateau coincidence where the metric is
            # locally constant, so two in a row are required
            done = (ok & calm[idx]) | (level[idx] >= stop[idx])
            calm[idx] = ok
            fresh[idx] = False
            est[idx] = new
            level[idx] += 1
            level[idx[done]] = -1
        active = active[level[active] >= 0]
    return est


def segment_lengths(metric, curve: PolylineCurve, rtol: float = QUAD_RTOL) -> np.ndarray:
    """Finsler length of every chord of ``curve`` (see ``chord_lengths``)."""
    return chord_lengths(metric, curve.points[:-1], curve.points[1:], rtol)


def finsler_length(metric, curve: PolylineCurve, rtol: float = QUAD_RTOL) -> float:
    return float(np.sum(segment_lengths(metric, curve, rtol)))


def max_boundary_distance(curve: PolylineCurve, domain: DomainModel, rtol: float = 1e-6) -> float:
    """Maximum of the boundary distance over vertices and adaptively sampled chords."""
    p0, p1 = curve.points[:-1], curve.points[1:]
    best = float(np.max(nearest_boundary_point(domain, curve.points)[1]))
    prev = -np.inf
    for level in range(1, MAX_LEVEL + 1):
        n = 2**level
        w = np.arange(1, n) / n
        pts = (p0[:, None, :] + w[None, :, None] * (p1 - p0)[:, None, :]).reshape(-1, 2)
        best = max(best, float(np.max(nearest_boundary_point(domain, pts)[1])))
        if abs(best - prev) <= rtol * best:
            break
        prev = best
    return best


def resample(curve: PolylineCurve, max_step: float) -> PolylineCurve:
    """Insert vertices on the chords so that no chord exceeds ``max_step``."""
    if not max_step > 0:
        raise ValueError("max_step must be positive")
    lens = cnorm(curve.chords)
    pieces = np.maximum(np.ceil(lens / max_step - 1e-12).astype(int), 1)
    if np.all(pieces == 1):
        return curve
    pts, par = [curve.points[:1]], [curve.params[:1]]
    for i, k in enumerate(pieces):
        w = np.arange(1, k + 1) / k
        pts.append(curve.points[i] + w[:, None] * (curve.points[i + 1] - curve.points[i]))
        par.append(curve.params[i] + w * (curve.params[i + 1] - curve.params[i]))
    params = np.concatenate(par)
    params[-1] = 1.0
    return PolylineCurve(np.concatenate(pts), params)


def length_parameterized(metric, curve: PolylineCurve) -> PolylineCurve:
    """Same vertices with parameters proportional to accumulated Finsler length."""
    seg = segment_lengths(metric, curve)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] <= 0:
        return curve
    params = s / s[-1]
    params[-1] = 1.0
    return curve.with_params(params)


def write_curve_csv(curve: PolylineCurve, domain: DomainModel, path) -> Path:
    delta = nearest_boundary_point(domain, curve.points)[1]
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["param", "z1_re", "z1_im", "z2_re", "z2_im", "delta"])
        for t, z, d in zip(curve.params, curve.points, delta):
            w.writerow([repr(float(v)) for v in (t, z[0].real, z[0].imag, z[1].real, z[1].imag, d)])
    return path


def read_curve_csv(path) -> PolylineCurve:
    with Path(path).open() as fh:
        rows = list(csv.DictReader(fh))
    pts = np.array([[float(r["z1_re"]) + 1j * float(r["z1_im"]), float(r["z2_re"]) + 1j * float(r["z2_im"])] for r in rows])
    return PolylineCurve(pts, np.array([float(r["param"]) for r in rows]))
