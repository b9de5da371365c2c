"""Gromov products, four-point hyperbolicity estimates, Hausdorff distances
between curves and the geodesic stability check."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .curves import PolylineCurve
from .errors import CatlinError, NumericError, PreconditionError
from .geometry import DomainModel, cnorm, to_real

NEAR_WEIGHT = 0.8  # near-boundary stratum drawn 4:1
PERMS = np.array(list(itertools.permutations(range(4))))


def gromov_product(dist_oracle, x, y, w) -> float:
    """(x|y)_w = (d(x,w) + d(y,w) - d(x,y)) / 2."""
    dxy = 0.0 if np.array_equal(np.asarray(x), np.asarray(y)) else dist_oracle(x, y)
    dxw = 0.0 if np.array_equal(np.asarray(x), np.asarray(w)) else dist_oracle(x, w)
    dyw = 0.0 if np.array_equal(np.asarray(y), np.asarray(w)) else dist_oracle(y, w)
    return 0.5 * (dxw + dyw - dxy)


def four_point_defect(d: np.ndarray, quads: np.ndarray) -> np.ndarray:
    """min{(x|z)_w, (z|y)_w} - (x|y)_w for labelled quadruples (x, y, z, w).

    ``d`` is a distance matrix and ``quads`` an integer array of shape (n, 4).
    """
    x, y, z, w = quads.T
    g = lambda a, b: 0.5 * (d[a, w] + d[b, w] - d[a, b])  # noqa: E731
    return np.minimum(g(x, z), g(z, y)) - g(x, y)


def min_gromov_product(d: np.ndarray) -> float:
    """Smallest (x|y)_w over all triples of the matrix; negative only if the
    triangle inequality fails."""
    n = len(d)
    best = np.inf
    for w in range(n):
        prod = 0.5 * (d[:, w][:, None] + d[w, :][None, :] - d)
        best = min(best, float(prod.min()))
    return best


@dataclass
class HyperbolicityReport:
    delta_est: float
    quadruple_count: int
    worst_quadruple: np.ndarray | None  # (4, 2) complex, labelled (x, y, z, w)
    basepoint_policy: str
    failures: int = 0
    min_gromov_product: float = float("nan")
    strata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        worst = None
        if self.worst_quadruple is not None:
            worst = [[float(v) for v in to_real(p)] for p in self.worst_quadruple]
        return {
            "delta_est": float(self.delta_est),
            "quadruple_count": int(self.quadruple_count),
            "worst_quadruple": worst,
            "basepoint_policy": self.basepoint_policy,
            "failures": int(self.failures),
            "min_gromov_product": float(self.min_gromov_product),
            "strata": {k: int(v) for k, v in self.strata.items()},
        }

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path


def _distance_table(dist_oracle, pts):
    """Full matrix, with NaN marking failed pairs."""
    n = len(pts)
    if hasattr(dist_oracle, "matrix"):
        try:
            return np.asarray(dist_oracle.matrix(pts), dtype=float)
        except CatlinError:
            pass
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            if np.array_equal(pts[i], pts[j]):
                continue
            try:
                d[i, j] = d[j, i] = dist_oracle(pts[i], pts[j])
            except CatlinError:
                d[i, j] = d[j, i] = np.nan
    return d


def estimate_delta(dist_oracle, points, quadruple_budget: int, seed: int = 0, near=None,
                   distances: np.ndarray | None = None) -> HyperbolicityReport:
    """Four-point delta over ``quadruple_budget`` sampled quadruples.

    ``near`` flags the near-boundary stratum; each slot of a quadruple comes
    from it with probability 0.8 (uniform sampling when absent). Every sampled
    4-set is scored under all 24 labellings. The basepoint w comes from the
    same pool. Quadruples touching a failed oracle pair are skipped and
    counted. A precomputed ``distances`` matrix bypasses the oracle.
    """
    pts = np.asarray(points, dtype=complex)
    n = len(pts)
    if n < 4:
        raise PreconditionError("need at least four points")
    if quadruple_budget < 1:
        raise PreconditionError("quadruple budget must be positive")
    d = _distance_table(dist_oracle, pts) if distances is None else np.asarray(distances, dtype=float)
    near = np.zeros(n, dtype=bool) if near is None else np.asarray(near, dtype=bool)
    near_idx, far_idx = np.flatnonzero(near), np.flatnonzero(~near)
    # one uniform block per quadruple keeps sampling prefix-stable in the budget
    u = np.random.default_rng(seed).random((int(quadruple_budget), 8))
    if len(near_idx) and len(far_idx):
        pick_near = u[:, :4] < NEAR_WEIGHT
        qn = near_idx[np.minimum((u[:, 4:] * len(near_idx)).astype(int), len(near_idx) - 1)]
        qf = far_idx[np.minimum((u[:, 4:] * len(far_idx)).astype(int), len(far_idx) - 1)]
        quads = np.where(pick_near, qn, qf)
        policy = "stratified-pool"
    else:
        quads = np.minimum((u[:, 4:] * n).astype(int), n - 1)
        policy = "uniform-pool"
    bad = np.isnan(d)
    ok = ~np.array([bad[np.ix_(q, q)].any() for q in quads]) if bad.any() else np.ones(len(quads), bool)
    labelled = quads[ok][:, PERMS]  # (m, 24, 4)
    flat = labelled.reshape(-1, 4)
    defect = four_point_defect(np.nan_to_num(d), flat).reshape(len(labelled), len(PERMS))
    worst = None
    delta = 0.0
    if defect.size:
        k = int(np.argmax(defect))
        qi, pi = divmod(k, len(PERMS))
        if defect[qi, pi] > 0:
            delta = float(defect[qi, pi])
        worst = pts[labelled[qi, pi]]
    used = np.unique(quads[ok])
    sub = np.nan_to_num(d[np.ix_(used, used)], nan=np.inf) if len(used) else np.zeros((0, 0))
    return HyperbolicityReport(
        delta_est=delta,
        quadruple_count=int(ok.sum()),
        worst_quadruple=worst,
        basepoint_policy=policy,
        failures=int((~ok).sum()),
        min_gromov_product=min_gromov_product(sub) if len(used) else float("nan"),
        strata={"near": int(near.sum()), "far": int((~near).sum())},
    )


def _curve_samples(curve: PolylineCurve, n: int) -> np.ndarray:
    return curve.at(np.linspace(0.0, 1.0, max(int(n), 2)))


def _cross(dist_oracle, a, b) -> np.ndarray:
    if hasattr(dist_oracle, "matrix"):
        m = dist_oracle.matrix(np.concatenate([a, b]))
        return m[: len(a), len(a) :]
    return np.array([[0.0 if np.array_equal(p, q) else dist_oracle(p, q) for q in b] for p in a])


def hausdorff_distance(dist_oracle, curve_a: PolylineCurve, curve_b: PolylineCurve,
                       sample_per_curve: int = 17, targets_per_curve: int | None = None) -> float:
    """Symmetrized max-min oracle distance between sampled curves.

    ``sample_per_curve`` points of each curve are measured against
    ``targets_per_curve`` points of the other (default about four times as
    many). Equally spaced samples nest when the count
    n becomes 2n - 1, so refining the targets can only lower the estimate.
    """
    m = targets_per_curve or 4 * (max(int(sample_per_curve), 2) - 1) + 1
    qa, qb = _curve_samples(curve_a, sample_per_curve), _curve_samples(curve_b, sample_per_curve)
    ta, tb = _curve_samples(curve_a, m), _curve_samples(curve_b, m)
    ab = _cross(dist_oracle, qa, tb).min(axis=1).max()
    ba = _cross(dist_oracle, qb, ta).min(axis=1).max()
    return float(max(ab, ba))


# ---------------------------------------------------------------------------
# stability of quasi-geodesics


@dataclass
class StabilityResult:
    R_est: float
    lambda_target: float
    lambda_achieved: float
    detour_scale: float
    geodesic_lambda: float
    detour: PolylineCurve | None = field(default=None, repr=False)
    geodesic: PolylineCurve | None = field(default=None, repr=False)


def _detour_direction(domain: DomainModel, frame, x, y) -> np.ndarray:
    """Unit vector in the frame, orthogonal to the chord, pointing inward."""
    ux, uy = frame.to_coords(np.stack([x, y]))
    chord = uy - ux
    chord = chord / np.linalg.norm(chord)
    toward = frame.to_coords(domain.base_point[None])[0] - 0.5 * (ux + uy)
    v = toward - (toward @ chord) * chord
    if np.linalg.norm(v) < 1e-9:
        v = np.zeros_like(chord)
        v[np.argmin(np.abs(chord))] = 1.0
        v = v - (v @ chord) * chord
    return v / np.linalg.norm(v)


def _bent(curve: PolylineCurve, frame, v, s):
    t = curve.params
    shift = frame.to_point(np.outer(s * np.sin(np.pi * t), v)) - frame.to_point(np.zeros((1, len(v))))
    return PolylineCurve(curve.points + shift, t)


def stability_check(domain: DomainModel, metric, x, y, lambda_target: float, budget=None,
                    samples: int = 17, tol: float = 0.2, return_info: bool = False):
    """Hausdorff distance between a best geodesic and a detoured lambda-quasi-geodesic.

    The detour bends the geodesic by ``s * sin(pi t) * v`` with ``v`` normal to
    the chord; ``s`` is bisected until the grid certificate is within ``tol``
    (relative) of ``lambda_target``. Both the certificate and the Hausdorff
    distance use the same graph, the latter without direct chords.
    """
    from .geodesics import (
        GeodesicBudget,
        GraphDistance,
        build_graded_graph,
        certify_quasi_geodesic,
        geodesic_between,
    )

    budget = budget or GeodesicBudget()
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    if lambda_target < 1:
        raise PreconditionError("lambda_target must be >= 1")
    dmin = budget.delta_min if budget.delta_min is not None else 1e-3 * domain.inradius
    graph = budget.graph
    if graph is None:
        # whole domain: detours may wander far from the chord
        dx, dy = metric.delta(np.stack([x, y]))
        floor = dmin if budget.depth_floor_ratio is None else max(dmin, budget.depth_floor_ratio * min(dx, dy))
        graph = build_graded_graph(domain, metric, budget.h, floor, budget.frame, None, max_nodes=budget.max_nodes)
    geo = geodesic_between(domain, metric, x, y, _with_graph(budget, graph))
    if geo.curve is None:
        raise PreconditionError("x and y coincide")
    oracle = GraphDistance(graph)
    lam0 = geo.lambda_grid
    if lambda_target <= lam0 * (1 + tol):
        res = StabilityResult(0.0, lambda_target, lam0, 0.0, lam0, geo.curve, geo.curve)
        return res if return_info else res.R_est
    v = _detour_direction(domain, budget.frame, x, y)
    sep = float(cnorm(x - y))

    def attempt(sign):
        def lam_of(s):
            c = _bent(geo.curve, budget.frame, sign * v, s)
            dense = c.at(np.linspace(0, 1, 8 * len(c.points)))
            if not np.all(metric.contains(dense)):
                return None, c
            try:
                return certify_quasi_geodesic(metric, c, oracle, budget.certify_grid), c
            except CatlinError:
                return None, c

        lo, hi = 0.0, 0.0
        s = 0.05 * sep
        lam_hi = None
        while s < 4.0 * sep + 1.0:
            lam, c = lam_of(s)
            if lam is None:
                break
            if lam >= lambda_target:
                hi, lam_hi = s, (lam, c)
                break
            lo = s
            s *= 1.6
        if lam_hi is None:
            return None
        best = lam_hi
        for _ in range(30):
            if abs(best[0] - lambda_target) <= tol * lambda_target:
                return hi, best
            mid = 0.5 * (lo + hi)
            lam, c = lam_of(mid)
            if lam is None or lam >= lambda_target:
                hi = mid
                if lam is not None:
                    best = (lam, c)
            else:
                lo = mid
                if abs(lam - lambda_target) <= tol * lambda_target:
                    return mid, (lam, c)
        return (hi, best) if abs(best[0] - lambda_target) <= tol * lambda_target else None

    found = attempt(1.0) or attempt(-1.0)
    if found is None:
        raise NumericError(f"no detour reaches lambda {lambda_target} within {tol:.0%}")
    s, (lam, detour) = found
    # graph-only distances: chord quadrature for every sample pair is prohibitive
    R = hausdorff_distance(GraphDistance(graph, use_chord=False), detour, geo.curve, samples)
    res = StabilityResult(R, lambda_target, float(lam), float(s), lam0, detour, geo.curve)
    return res if return_info else res.R_est


def _with_graph(budget, graph):
    from dataclasses import replace

    return replace(budget, graph=graph)
