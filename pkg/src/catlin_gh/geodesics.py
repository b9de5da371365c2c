"""Approximate Finsler geodesics.

A boundary-graded lattice graph is searched with Dijkstra, the resulting
polyline is refined by coordinate descent on the Finsler length, and the
final curve receives a quasi-geodesic certificate.

Lattices live on an affine real subspace of C^2 (``SliceFrame``): the full
four real dimensions, or the two-dimensional real slice ``Im z1 = Im z2 = 0``
which is fixed by complex conjugation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.spatial import cKDTree

from .curves import (
    PolylineCurve,
    chord_lengths,
    euclidean_length,
    finsler_length,
    length_parameterized,
    max_boundary_distance,
    segment_lengths,
    write_curve_csv,
)
from .errors import CatlinError, PreconditionError, ReachabilityError, ResourceError
from .geometry import DomainModel, cnorm, to_complex, to_real

DEFAULT_MAX_NODES = 1_500_000
EDGE_CHUNK = 50_000
LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class SliceFrame:
    """Affine real subspace ``origin + basis @ u`` of R^4 = C^2."""

    origin: np.ndarray  # real (4,)
    basis: np.ndarray  # real (4, d), orthonormal columns
    name: str = "custom"

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def to_point(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return to_complex(self.origin + u @ self.basis.T)

    def to_coords(self, z) -> np.ndarray:
        return (to_real(z) - self.origin) @ self.basis

    def residual(self, z) -> np.ndarray:
        x = to_real(z) - self.origin
        return np.linalg.norm(x - (x @ self.basis) @ self.basis.T, axis=-1)


FULL_FRAME = SliceFrame(np.zeros(4), np.eye(4), "full")
REAL_SLICE = SliceFrame(np.zeros(4), np.eye(4)[:, [0, 2]], "real-slice")


def _stencil(d: int) -> np.ndarray:
    """Lexicographically positive half of {-1, 0, 1}^d minus the origin."""
    pts = np.array(np.meshgrid(*([[-1, 0, 1]] * d), indexing="ij")).reshape(d, -1).T
    first = np.argmax(pts != 0, axis=1)
    lead = pts[np.arange(len(pts)), first]
    return pts[np.any(pts != 0, axis=1) & (lead > 0)]


@dataclass
class GradedGraph:
    """Lattice graph with dyadic refinement toward the boundary.

    Node coordinates are integers in units of the finest spacing ``unit``;
    band ``k`` nodes sit on the sublattice of spacing ``h * 2**-k``.
    """

    metric: object
    frame: SliceFrame
    h: float
    delta_min: float
    n_bands: int
    coords: np.ndarray  # int (N, d)
    points: np.ndarray  # complex (N, 2)
    delta: np.ndarray
    band: np.ndarray
    edges: np.ndarray  # int (E, 2), i < j
    costs: np.ndarray
    component: np.ndarray
    _matrix: object = field(default=None, repr=False)
    _tree: object = field(default=None, repr=False)

    @property
    def domain(self) -> DomainModel:
        return self.metric.domain

    @property
    def unit(self) -> float:
        return self.h / 2**self.n_bands

    @property
    def n_nodes(self) -> int:
        return len(self.points)

    def spacing(self, band) -> np.ndarray:
        return self.h / 2.0 ** np.asarray(band)

    @property
    def matrix(self):
        if self._matrix is None:
            n = self.n_nodes
            m = coo_matrix((self.costs, (self.edges[:, 0], self.edges[:, 1])), shape=(n, n))
            self._matrix = m.tocsr()
        return self._matrix

    @property
    def tree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self.coords * self.unit)
        return self._tree

    def band_counts(self) -> dict:
        b, c = np.unique(self.band, return_counts=True)
        return {int(k): int(v) for k, v in zip(b, c)}

    def distances_from(self, nodes, limit: float = np.inf):
        return dijkstra(self.matrix, directed=False, indices=nodes, limit=limit, return_predecessors=True)


def band_count(inradius: float, delta_min: float) -> int:
    """Bands [2^-k-1 D, 2^-k D), k = 1..K, until the lower edge reaches delta_min."""
    return max(1, int(np.ceil(np.log2(inradius / delta_min) - 1e-12)) - 1)


def _signed_distance(metric, z) -> np.ndarray:
    inside = metric.contains(z)
    out = np.full(len(z), -np.inf)
    if np.any(inside):
        out[inside] = metric.delta(z[inside])
    if np.any(~inside):
        dom = metric.domain
        zo = z[~inside]
        ok = dom.in_bbox(zo)
        vals = np.full(len(zo), -np.inf)
        if np.any(ok):
            from .geometry import nearest_boundary_point

            vals[ok] = -nearest_boundary_point(dom, zo[ok])[1]
        out[~inside] = vals
    return out


def _box_lattice(lo, hi, step: int) -> np.ndarray:
    # starts at the cell containing lo, so that children of these points cover the box
    axes = [np.arange(np.floor(a / step), np.floor(b / step) + 1, dtype=np.int64) * step for a, b in zip(lo, hi)]
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grid], axis=1)


def _keys(coords: np.ndarray, lo: np.ndarray, span: np.ndarray) -> np.ndarray:
    return np.ravel_multi_index(tuple((coords - lo).T), tuple(span))


def build_graded_graph(
    domain: DomainModel,
    metric,
    h: float,
    delta_min: float,
    frame: SliceFrame = FULL_FRAME,
    window=None,
    n_bands: int | None = None,
    max_nodes: int = DEFAULT_MAX_NODES,
) -> GradedGraph:
    """Graded lattice on ``frame`` restricted to ``window`` (box in frame coordinates).

    Depths are measured with ``metric.delta`` so that windowed metrics get the
    intersection's boundary distance.
    """
    if not (h > 0 and delta_min > 0):
        raise PreconditionError("h and delta_min must be positive")
    if metric.domain is not domain:
        raise PreconditionError("metric belongs to a different domain")
    d = frame.dim
    D = domain.inradius
    if h * np.sqrt(d) > D / 2:
        raise PreconditionError(f"h = {h} too coarse for inradius {D:.3g} in dimension {d}")
    K = band_count(D, delta_min) if n_bands is None else int(n_bands)
    unit = h / 2**K
    if window is None:
        corners = np.array(np.meshgrid(*[[0, 1]] * 4, indexing="ij")).reshape(4, -1).T
        box = domain.bbox_lo + corners * (domain.bbox_hi - domain.bbox_lo)
        u = (box - frame.origin) @ frame.basis
        window = (u.min(axis=0), u.max(axis=0))
    wlo = np.asarray(window[0], dtype=float)
    whi = np.asarray(window[1], dtype=float)
    lo_i = np.floor(wlo / unit).astype(np.int64)
    hi_i = np.ceil(whi / unit).astype(np.int64)
    span = hi_i - lo_i + 1
    if np.prod(span.astype(float)) > 2**62:
        raise ResourceError("lattice index space too large", estimate=float(np.prod(span.astype(float))))
    rt = np.sqrt(d)

    def band_edges(k):
        top = np.inf if k == 0 else D / 2**k
        bottom = delta_min if k == K else D / 2 ** (k + 1)
        return bottom, top

    node_c, node_sd, node_b = [], [], []
    step = 2**K
    cand = _box_lattice(lo_i, hi_i, step)
    total = 0
    for k in range(K + 1):
        if len(cand) > max_nodes * 4:
            raise ResourceError(
                f"graded lattice needs about {len(cand)} candidates at band {k}", estimate=float(len(cand))
            )
        z = frame.to_point(cand * unit)
        sd = _signed_distance(metric, z)
        bottom, top = band_edges(k)
        inwin = np.all((cand >= lo_i) & (cand <= hi_i), axis=1)
        keep = (sd >= bottom) & (sd < top) & inwin
        node_c.append(cand[keep])
        node_sd.append(sd[keep])
        node_b.append(np.full(int(keep.sum()), k))
        total += int(keep.sum())
        if total > max_nodes:
            raise ResourceError(f"graded lattice exceeds {max_nodes} nodes", estimate=float(total))
        if k == K:
            break
        s_k = step * unit
        nxt_top = D / 2 ** (k + 1)
        parents = cand[(sd >= -3 * s_k * rt) & (sd <= nxt_top + 2 * s_k * rt)]
        step //= 2
        kids = (parents[:, None, :] + step * np.array(np.meshgrid(*[[0, 1]] * d, indexing="ij")).reshape(d, -1).T[None]).reshape(-1, d)
        inb = np.all(kids <= hi_i, axis=1)
        kids = kids[inb]
        # coarser-lattice points are already decided; keep only new lattice points
        cand = np.unique(kids, axis=0)
    coords = np.concatenate(node_c)
    delta = np.concatenate(node_sd)
    band = np.concatenate(node_b)
    keys = _keys(coords, lo_i, span)
    order = np.argsort(keys, kind="stable")
    coords, delta, band, keys = coords[order], delta[order], band[order], keys[order]
    # a point may qualify at two levels only if it sits on both lattices; keep the coarser tag
    keys, first = np.unique(keys, return_index=True)
    coords, delta, band = coords[first], delta[first], band[first]
    points = frame.to_point(coords * unit)
    edges, costs = _lattice_edges(metric, coords, band, keys, lo_i, hi_i, span, K, points)
    graph = GradedGraph(metric, frame, h, delta_min, K, coords, points, delta, band, edges, costs,
                        np.zeros(len(points), dtype=int))
    _seal(graph)
    return graph


def _lattice_edges(metric, coords, band, keys, lo_i, hi_i, span, K, points):
    d = coords.shape[1]
    sten = _stencil(d)
    src_all, dst_all = [], []
    steps = (2 ** (K - band)).astype(np.int64)
    for e in sten:
        tgt = coords + steps[:, None] * e[None, :]
        ok = np.all((tgt >= lo_i) & (tgt <= hi_i), axis=1)
        tk = np.full(len(tgt), -1, dtype=np.int64)
        tk[ok] = _keys(tgt[ok], lo_i, span)
        pos = np.searchsorted(keys, tk)
        pos = np.minimum(pos, len(keys) - 1)
        hit = ok & (keys[pos] == tk)
        src_all.append(np.flatnonzero(hit))
        dst_all.append(pos[hit])
    src = np.concatenate(src_all)
    dst = np.concatenate(dst_all)
    pairs = np.unique(np.sort(np.stack([src, dst], axis=1), axis=1), axis=0)
    mids = 0.5 * (points[pairs[:, 0]] + points[pairs[:, 1]])
    inside = metric.contains(mids)
    pairs, mids = pairs[inside], mids[inside]
    chords = points[pairs[:, 1]] - points[pairs[:, 0]]
    costs = np.empty(len(pairs))
    for s in range(0, len(pairs), EDGE_CHUNK):
        costs[s : s + EDGE_CHUNK] = metric(mids[s : s + EDGE_CHUNK], chords[s : s + EDGE_CHUNK])
    good = np.isfinite(costs) & (costs > 0)
    return pairs[good], costs[good]


def _seal(graph: GradedGraph) -> None:
    _, labels = connected_components(graph.matrix, directed=False)
    graph.component = labels


def restrict_graph(graph: GradedGraph, metric) -> GradedGraph:
    """Subgraph on nodes where ``metric`` (same domain, typically windowed) applies.

    Nodes need ``metric.delta >= delta_min``; edge costs are recomputed with
    ``metric``. For a windowed metric every cost can only grow.
    """
    keep = metric.contains(graph.points)
    dl = np.full(graph.n_nodes, -np.inf)
    dl[keep] = metric.delta(graph.points[keep])
    keep &= dl >= graph.delta_min
    new_index = np.full(graph.n_nodes, -1)
    new_index[keep] = np.arange(int(keep.sum()))
    e = graph.edges
    ek = keep[e[:, 0]] & keep[e[:, 1]]
    e = e[ek]
    pts = graph.points
    mids = 0.5 * (pts[e[:, 0]] + pts[e[:, 1]])
    inside = metric.contains(mids)
    e, mids = e[inside], mids[inside]
    costs = np.empty(len(e))
    for s in range(0, len(e), EDGE_CHUNK):
        sl = slice(s, s + EDGE_CHUNK)
        costs[sl] = metric(mids[sl], pts[e[sl, 1]] - pts[e[sl, 0]])
    sub = GradedGraph(metric, graph.frame, graph.h, graph.delta_min, graph.n_bands, graph.coords[keep],
                      pts[keep], dl[keep], graph.band[keep], new_index[e], costs,
                      np.zeros(int(keep.sum()), dtype=int))
    _seal(sub)
    return sub


# ---------------------------------------------------------------------------
# queries


def snap(graph: GradedGraph, z) -> np.ndarray:
    """Nearest node for each point; the point must lie within one cell of it."""
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    res = graph.frame.residual(z)
    if np.any(res > 1e-9):
        raise PreconditionError("point lies off the graph's lattice frame")
    u = graph.frame.to_coords(z)
    dist, idx = graph.tree.query(u)
    cell = graph.spacing(graph.band[idx]) * np.sqrt(graph.frame.dim)
    if np.any(dist > cell * (1 + 1e-9)):
        raise PreconditionError("point does not snap to a graph node within one cell")
    return idx


def _stub_cost(metric, a, b) -> np.ndarray:
    """Finsler length of straight stubs a -> b (zero where they coincide)."""
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    out = np.zeros(len(a))
    move = np.any(a != b, axis=1)
    if np.any(move):
        out[move] = chord_lengths(metric, a[move], b[move])
    return out


def _chord_costs(metric, a, b) -> np.ndarray:
    """Costs of straight chords a[i] -> b[i], inf where a chord leaves the domain."""
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    w = np.linspace(0, 1, 33)
    probe = a[:, None, :] + w[None, :, None] * (b - a)[:, None, :]
    ok = metric.contains(probe.reshape(-1, 2)).reshape(len(a), -1).all(axis=1)
    out = np.full(len(a), np.inf)
    if np.any(ok):
        out[ok] = chord_lengths(metric, a[ok], b[ok])
    return out


def _chord_cost(metric, x, y) -> float:
    return float(_chord_costs(metric, x, y)[0])


def _path_nodes(pred: np.ndarray, src: int, dst: int) -> list:
    path = [dst]
    while path[-1] != src:
        p = pred[path[-1]]
        if p < 0:
            raise ReachabilityError("no path between snapped endpoints")
        path.append(int(p))
    return path[::-1]


def shortest_path_distance(graph: GradedGraph, x, y):
    """Graph distance between ``x`` and ``y`` including straight endpoint stubs.

    Returns ``(cost, curve)``; for ``x == y`` the cost is 0 and the curve ``None``.
    """
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    if np.array_equal(x, y):
        return 0.0, None
    sx, sy = snap(graph, np.stack([x, y]))
    if graph.component[sx] != graph.component[sy]:
        raise ReachabilityError("endpoints lie in different graph components")
    dist, pred = graph.distances_from(sx)
    if not np.isfinite(dist[sy]):
        raise ReachabilityError("no path between snapped endpoints")
    nodes = _path_nodes(pred, sx, sy)
    pts = [x] + [graph.points[i] for i in nodes] + [y]
    clean = [pts[0]]
    for p in pts[1:-1]:
        if cnorm(p - clean[-1]) > 1e-12:
            clean.append(p)
    # keep y exact; drop a lattice node sitting on it
    if len(clean) > 1 and cnorm(pts[-1] - clean[-1]) <= 1e-12:
        clean.pop()
    if cnorm(pts[-1] - clean[-1]) > 0:
        clean.append(pts[-1])
    if len(clean) < 2:
        return 0.0, None
    stubs = _stub_cost(graph.metric, np.stack([x, y]), graph.points[[sx, sy]])
    cost = float(dist[sy] + stubs.sum())
    return cost, PolylineCurve.from_points(np.array(clean))


class GraphDistance:
    """Distance oracle: min of graph route (with stubs) and the direct chord.

    Dijkstra rows are cached per source node. Arbitrary points are snapped;
    lattice nodes resolve exactly.
    """

    def __init__(self, graph: GradedGraph, use_chord: bool = True):
        self.graph = graph
        self.use_chord = use_chord
        self._rows: dict = {}

    def _row(self, node: int, limit=np.inf):
        hit = self._rows.get(node)
        if hit is not None and hit[1] >= limit:
            return hit[0]
        row = self.graph.distances_from(node, limit=limit)[0]
        self._rows[node] = (row, limit)
        return row

    def __call__(self, x, y) -> float:
        return float(self.matrix(np.stack([np.asarray(x), np.asarray(y)]))[0, 1])

    def matrix(self, points, limit: float = np.inf) -> np.ndarray:
        """Symmetric matrix of oracle distances among ``points``."""
        pts = np.asarray(points, dtype=complex)
        n = len(pts)
        nodes = snap(self.graph, pts)
        stubs = _stub_cost(self.graph.metric, pts, self.graph.points[nodes])
        out = np.zeros((n, n))
        for i in range(n):
            row = self._row(int(nodes[i]), limit)
            out[i, i + 1 :] = row[nodes[i + 1 :]] + stubs[i] + stubs[i + 1 :]
        iu, ju = np.triu_indices(n, 1)
        same = np.all(pts[iu] == pts[ju], axis=1)
        out[iu[same], ju[same]] = 0.0
        if self.use_chord:
            sel = ~same
            cc = _chord_costs(self.graph.metric, pts[iu[sel]], pts[ju[sel]])
            out[iu[sel], ju[sel]] = np.minimum(out[iu[sel], ju[sel]], cc)
        out = np.triu(out, 1)
        return out + out.T

    def node_matrix(self, nodes) -> np.ndarray:
        """Exact graph distances among lattice nodes (a metric on the nodes)."""
        nodes = np.asarray(nodes, dtype=int)
        rows = self.graph.distances_from(nodes)[0]
        m = rows[:, nodes]
        return np.minimum(m, m.T)


# ---------------------------------------------------------------------------
# refinement


@dataclass
class RefineInfo:
    lengths: list
    converged: bool
    rounds: int


def _seg_costs(metric, a, b, n_sub: int = 2):
    """Midpoint rule with ``n_sub`` pieces for the chords a[i] -> b[i]."""
    w = (np.arange(n_sub) + 0.5) / n_sub
    pts = a[:, None, :] + w[None, :, None] * (b - a)[:, None, :]
    vec = np.repeat(b - a, n_sub, axis=0)
    f, dl = metric.evaluate(pts.reshape(-1, 2), vec)
    return f.reshape(len(a), n_sub).mean(axis=1), dl.reshape(len(a), n_sub).min(axis=1)


def _densify(metric, curve: PolylineCurve, ratio: float, max_vertices: int) -> PolylineCurve:
    """Insert vertices until every chord is at most ``ratio`` times its midpoint depth."""
    pts = curve.points
    for _ in range(8):
        mids = 0.5 * (pts[1:] + pts[:-1])
        dl = metric.delta(mids)
        lens = cnorm(np.diff(pts, axis=0))
        pieces = np.maximum(np.ceil(lens / (ratio * dl)), 1).astype(int)
        if np.all(pieces == 1) or len(pts) + pieces.sum() - len(pieces) > max_vertices:
            break
        new = [pts[:1]]
        for i, k in enumerate(pieces):
            w = np.arange(1, k + 1) / k
            new.append(pts[i] + w[:, None] * (pts[i + 1] - pts[i]))
        pts = np.concatenate(new)
    return PolylineCurve.from_points(pts)


def simplify(curve: PolylineCurve, tol: float = 1e-12) -> PolylineCurve:
    """Drop interior vertices lying on the chord between their neighbours."""
    pts = curve.points
    keep = [0]
    for i in range(1, len(pts) - 1):
        a, b, c = pts[keep[-1]], pts[i], pts[i + 1]
        ab, ac = to_real(b - a), to_real(c - a)
        t = np.dot(ab, ac) / np.dot(ac, ac)
        if np.linalg.norm(ab - t * ac) > tol * (1 + np.linalg.norm(ac)) or not 0 < t < 1:
            keep.append(i)
    keep.append(len(pts) - 1)
    return PolylineCurve.from_points(pts[keep])


def refine_curve(
    metric,
    curve: PolylineCurve,
    iterations: int,
    delta_min: float = 0.0,
    return_info: bool = False,
    frozen_dims=None,
):
    """Red-black coordinate descent on the interior vertices.

    Every round tries moves of +-step along each of the four real axes for
    alternating vertex parities. A round is kept only if the adaptive Finsler
    length does not increase, so the recorded length sequence is monotone.
    ``frozen_dims`` lists real axes that must not move.
    """
    pts = curve.points.copy()
    n = len(pts)
    length = finsler_length(metric, curve)
    lengths = [length]
    if n <= 2 or iterations <= 0:
        out = PolylineCurve.from_points(pts)
        return (out, RefineInfo(lengths, n <= 2, 0)) if return_info else out
    x = to_real(pts)
    seg = np.linalg.norm(np.diff(x, axis=0), axis=1)
    step = 0.25 * np.minimum(seg[:-1], seg[1:])
    dims = [c for c in range(4) if frozen_dims is None or c not in frozen_dims]
    idle = 0
    converged = False
    rounds = 0
    for rounds in range(1, iterations + 1):
        x_old = x.copy()
        moved = np.zeros(n - 2, dtype=bool)
        for parity in (0, 1):
            idx = np.arange(1 + parity, n - 1, 2)
            if len(idx) == 0:
                continue
            for c in dims:
                zp, zc, zn = to_complex(x[idx - 1]), to_complex(x[idx]), to_complex(x[idx + 1])
                cur = _seg_costs(metric, zp, zc)[0] + _seg_costs(metric, zc, zn)[0]
                best = cur.copy()
                best_x = x[idx].copy()
                for sgn in (1.0, -1.0):
                    trial = x[idx].copy()
                    trial[:, c] += sgn * step[idx - 1]
                    zt = to_complex(trial)
                    ok = metric.contains(zt)
                    if not np.any(ok):
                        continue
                    e = np.full(len(idx), np.inf)
                    dt = np.zeros(len(idx))
                    dt[ok] = metric.delta(zt[ok])
                    ok &= dt >= delta_min
                    if np.any(ok):
                        try:
                            c1, m1 = _seg_costs(metric, zp[ok], zt[ok])
                            c2, m2 = _seg_costs(metric, zt[ok], zn[ok])
                        except CatlinError:
                            continue
                        e[ok] = c1 + c2
                    better = e < best * (1 - 1e-12)
                    best = np.where(better, e, best)
                    best_x[better] = trial[better]
                changed = np.any(best_x != x[idx], axis=1)
                x[idx] = best_x
                moved[idx[changed] - 1] = True
        new_curve = PolylineCurve.from_points(to_complex(x))
        new_len = finsler_length(metric, new_curve)
        if new_len > length or not np.any(moved):
            x = x_old
            step *= 0.5
            idle += 1
            lengths.append(length)
        else:
            step = np.where(moved, step * 1.25, step * 0.5)
            length = new_len
            lengths.append(length)
            idle = 0
        if idle >= 5 or np.all(step < 1e-9):
            converged = True
            break
    out = PolylineCurve.from_points(to_complex(x))
    return (out, RefineInfo(lengths, converged, rounds)) if return_info else out


# ---------------------------------------------------------------------------
# geodesics and certificates


@dataclass
class GeodesicBudget:
    """Discretisation controls for ``geodesic_between``."""

    h: float = 0.1
    delta_min: float | None = None  # default 1e-3 * inradius
    refine_rounds: int = 12
    frame: SliceFrame = FULL_FRAME
    window_margin: float = 0.5
    max_nodes: int = DEFAULT_MAX_NODES
    c_lb: float | None = None  # 2x the fitted sandwich constant; None: not yet fitted
    certify_grid: int = 15
    max_vertices: int = 160
    depth_floor_ratio: float | None = 0.25  # graph floor relative to the deeper endpoint
    refine_frozen: tuple = ()
    graph: GradedGraph | None = None


@dataclass
class GeodesicResult:
    x: np.ndarray
    y: np.ndarray
    curve: PolylineCurve | None
    finsler_len: float
    euclid_len: float
    h_gamma: float
    lambda_cert: float
    lower_bound_used: float
    graph_len: float = float("nan")
    lambda_grid: float = 1.0
    refine_converged: bool = True
    domain: DomainModel | None = field(default=None, repr=False)

    def to_record(self, curve_csv: str | None = None) -> dict:
        return {
            "x": [float(v) for v in to_real(self.x)],
            "y": [float(v) for v in to_real(self.y)],
            "finsler_len": float(self.finsler_len),
            "euclid_len": float(self.euclid_len),
            "h_gamma": float(self.h_gamma),
            "lambda_cert": float(self.lambda_cert),
            "lower_bound_used": float(self.lower_bound_used),
            "graph_len": float(self.graph_len),
            "lambda_grid": float(self.lambda_grid),
            "curve_csv": curve_csv,
        }

    def write(self, json_path, csv_path=None) -> None:
        ref = None
        if csv_path is not None and self.curve is not None:
            write_curve_csv(self.curve, self.domain, csv_path)
            ref = Path(csv_path).name
        Path(json_path).write_text(json.dumps(self.to_record(ref), indent=2, sort_keys=True) + "\n")


def pair_window(domain: DomainModel, frame: SliceFrame, x, y, margin: float):
    """Box in frame coordinates around ``x`` and ``y`` padded by ``margin * |x - y|``."""
    u = frame.to_coords(np.stack([x, y]))
    sep = float(cnorm(np.asarray(x) - np.asarray(y)))
    pad = margin * sep + 0.05
    return u.min(axis=0) - pad, u.max(axis=0) + pad


def dominates_normal_part(metric) -> bool:
    """True when F(z, X) >= |X_N| / delta everywhere, so that every curve from
    x to y has length at least |log(delta(x) / delta(y))|."""
    if metric.window is not None or metric.kind in ("euclidean", "catlin_local"):
        return False
    if metric.kind == "catlin_patched":
        from .metrics import seam_constant

        return seam_constant(metric.domain) >= 1.0 / metric.domain.collar_eps
    return True


def certify_quasi_geodesic(metric, curve: PolylineCurve, dist_oracle, grid: int = 15) -> float:
    """Smallest lambda with lambda^-1 l(s,t) <= d(s,t) <= lambda l(s,t) on a grid.

    ``l(s,t)`` is the Finsler length of the sub-arc (parameters proportional to
    length) and ``d`` the oracle distance, capped by ``l`` since the sub-arc
    itself is a competitor.
    """
    grid = max(int(grid), 15)
    c = length_parameterized(metric, curve)
    total = finsler_length(metric, c)
    if total <= 0:
        return 1.0
    t = np.linspace(0.0, 1.0, grid)
    pts = c.at(t)
    seg = segment_lengths(metric, c)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    arc = np.interp(t, c.params, cum)
    if hasattr(dist_oracle, "matrix"):
        dm = dist_oracle.matrix(pts, limit=total * 1.05 + 1e-9)
    else:
        dm = np.array([[dist_oracle(p, q) if i != j else 0.0 for j, q in enumerate(pts)] for i, p in enumerate(pts)])
    lam = 1.0
    for i in range(grid):
        for j in range(i + 1, grid):
            ell = abs(arc[j] - arc[i])
            if ell <= 0:
                continue
            d = min(dm[i, j], ell)
            if d <= 0:
                return np.inf
            lam = max(lam, ell / d, d / ell)
    return float(lam)


def geodesic_between(domain: DomainModel, metric, x, y, budget: GeodesicBudget | None = None) -> GeodesicResult:
    """Graph search, refinement and certification for one pair."""
    budget = budget or GeodesicBudget()
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    if not np.all(metric.contains(np.stack([x, y]))):
        raise PreconditionError("endpoints must lie in the domain")
    dx, dy = metric.delta(np.stack([x, y]))
    if np.array_equal(x, y):
        return GeodesicResult(x, y, None, 0.0, 0.0, float(dx), 1.0, 0.0, 0.0, domain=domain)
    dmin = budget.delta_min if budget.delta_min is not None else 1e-3 * domain.inradius
    graph = budget.graph
    if graph is None:
        win = pair_window(domain, budget.frame, x, y, budget.window_margin)
        floor = dmin
        if budget.depth_floor_ratio is not None:
            floor = max(dmin, budget.depth_floor_ratio * min(dx, dy))
        graph = build_graded_graph(domain, metric, budget.h, floor, budget.frame, win, max_nodes=budget.max_nodes)
    g_len, path = shortest_path_distance(graph, x, y)
    cand = [(g_len, path)]
    chord = _chord_cost(metric, x, y)
    if np.isfinite(chord):
        cand.append((chord, PolylineCurve.from_points([x, y])))
    start = min(cand, key=lambda c: c[0])[1]
    start = _densify(metric, simplify(start), 0.5, budget.max_vertices)
    curve, info = refine_curve(metric, start, budget.refine_rounds, dmin, return_info=True,
                               frozen_dims=budget.refine_frozen or None)
    L = finsler_length(metric, curve)
    oracle = GraphDistance(graph)
    lam_grid = certify_quasi_geodesic(metric, curve, oracle, budget.certify_grid)
    log_gap = abs(np.log(dx / dy))
    lb_dg = log_gap - budget.c_lb if budget.c_lb is not None else 0.0
    lb_normal = log_gap if dominates_normal_part(metric) else 0.0
    lb_grid = L / lam_grid if np.isfinite(lam_grid) else 0.0
    lower = min(max(lb_dg, lb_normal, lb_grid, LOG_FLOOR), L)
    res = GeodesicResult(
        x=x,
        y=y,
        curve=curve,
        finsler_len=L,
        euclid_len=euclidean_length(curve),
        h_gamma=max_boundary_distance(curve, domain),
        lambda_cert=max(1.0, L / lower),
        lower_bound_used=lower,
        graph_len=g_len,
        lambda_grid=lam_grid,
        refine_converged=info.converged,
        domain=domain,
    )
    return res
