"""Catlin-type Finsler metrics on model domains.

The iterated Levi coefficients

    L_{j,k} = L1^(j-1) Lb1^(k-1) [ddbar r(L1, Lb1)],
    L1 = d/dw1 - (r_w2)^-1 r_w1 d/dw2,

are derived once per (domain, chart frame, order) with sympy and then
evaluated with numpy. Everything else here is plain array code.
"""

from __future__ import annotations

import csv
import threading
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import sympy as sp
from scipy.spatial import cKDTree

from .errors import CapabilityError, ChartError, CollarError, DomainMembershipError, NumericError, PreconditionError
from .geometry import (
    DomainModel,
    ReferenceChart,
    TangentSplit,
    _check_bbox,
    cnorm,
    nearest_boundary_point,
    sample_boundary,
    tangent_split,
    to_complex,
    to_real,
    unit_normal_at,
)
from .poly import WIRTINGER_SYMBOLS

CHART_TOL = 1e-8
MAX_FRAME_COND = 1e8
BLEND_FACTOR = 1.5

_W = sp.symbols("w1 wb1 w2 wb2")
_cache: dict = {}
_cache_lock = threading.Lock()


def _frame_polynomial(domain: DomainModel, frame: np.ndarray):
    """r expressed in frame coordinates w = U z, i.e. r(U^H w)."""
    w1, wb1, w2, wb2 = _W
    z1, zb1, z2, zb2 = WIRTINGER_SYMBOLS
    U = [[sp.nsimplify(complex(frame[i, j]).real) + sp.I * sp.nsimplify(complex(frame[i, j]).imag)
          for j in range(2)] for i in range(2)]
    # z_k = sum_j conj(U_jk) w_j
    subs = {
        z1: sp.conjugate(U[0][0]) * w1 + sp.conjugate(U[1][0]) * w2,
        z2: sp.conjugate(U[0][1]) * w1 + sp.conjugate(U[1][1]) * w2,
        zb1: U[0][0] * wb1 + U[1][0] * wb2,
        zb2: U[0][1] * wb1 + U[1][1] * wb2,
    }
    return sp.expand(domain.r.to_sympy(WIRTINGER_SYMBOLS).subs(subs, simultaneous=True))


@dataclass(frozen=True)
class _ChartFunctions:
    keys: tuple  # ((j, k), ...) with j + k <= up_to
    coeffs: object  # lambdified -> list of arrays
    q: object  # r_w1 / r_w2 as a lambdified function
    r_w: object  # (r_w1, r_w2)


def _chart_functions(domain: DomainModel, frame: np.ndarray, up_to: int) -> _ChartFunctions:
    key = (domain.name, domain.r.coeffs.tobytes(), domain.r.exps.tobytes(), frame.tobytes(), up_to)
    with _cache_lock:
        hit = _cache.get(key)
    if hit is not None:
        return hit
    w1, wb1, w2, wb2 = _W
    r = _frame_polynomial(domain, frame)
    r1, r2 = sp.diff(r, w1), sp.diff(r, w2)
    rb1, rb2 = sp.diff(r, wb1), sp.diff(r, wb2)
    q = r1 / r2
    qb = rb1 / rb2

    def L(f):
        return sp.diff(f, w1) - q * sp.diff(f, w2)

    def Lb(f):
        return sp.diff(f, wb1) - qb * sp.diff(f, wb2)

    # ddbar r evaluated on (L1, conj L1) with L1 = (1, -q)
    levi = (
        sp.diff(r, w1, wb1)
        - qb * sp.diff(r, w1, wb2)
        - q * sp.diff(r, w2, wb1)
        + q * qb * sp.diff(r, w2, wb2)
    )
    exprs = {}
    col = levi
    for k in range(1, up_to):
        cur = col
        for j in range(1, up_to - k + 1):
            exprs[(j, k)] = cur
            if j + k < up_to:
                cur = L(cur)
        if k + 1 < up_to:
            col = Lb(col)
    keys = tuple(sorted(exprs))
    fn = sp.lambdify(list(_W), [exprs[k] for k in keys], "numpy", cse=True)
    fq = sp.lambdify(list(_W), q, "numpy")
    frw = sp.lambdify(list(_W), [r1, r2], "numpy")
    out = _ChartFunctions(keys, fn, fq, frw)
    with _cache_lock:
        _cache[key] = out
    return out


def _frame_coords(frame, z):
    w = np.einsum("ij,...j->...i", frame, np.asarray(z, dtype=complex))
    return w[..., 0], np.conj(w[..., 0]), w[..., 1], np.conj(w[..., 1])


def _check_chart(domain, chart, z):
    fns = _chart_functions(domain, chart.frame, 2)
    rw1, rw2 = (np.broadcast_to(v, np.shape(z)[:-1]) for v in fns.r_w(*_frame_coords(chart.frame, z)))
    grad = np.sqrt(np.abs(rw1) ** 2 + np.abs(rw2) ** 2)
    if np.any(np.abs(rw2) <= CHART_TOL * np.maximum(grad, 1.0)):
        raise ChartError("normal derivative d r / d w2 vanishes in this chart")


def vector_field_L1(domain: DomainModel, chart: ReferenceChart, z) -> np.ndarray:
    """Coefficients of L1 in the ambient z coordinates (shape (..., 2))."""
    z = _check_bbox(domain, z)
    _check_chart(domain, chart, z)
    fns = _chart_functions(domain, chart.frame, 2)
    q = np.broadcast_to(fns.q(*_frame_coords(chart.frame, z)), z.shape[:-1])
    a = np.stack([np.ones_like(q), -q], axis=-1)
    return np.einsum("ji,...j->...i", chart.frame.conj(), a)


@dataclass(frozen=True)
class CatlinCoefficients:
    base_point: np.ndarray
    values: dict  # l -> C_l(z)
    raw: dict  # (j, k) -> L_{j,k}(z)


def catlin_coefficients(domain: DomainModel, chart: ReferenceChart, z, up_to: int | None = None):
    z = _check_bbox(domain, z)
    up_to = chart.type_m if up_to is None else up_to
    if up_to > domain.jet_depth - 2:
        raise CapabilityError(f"order {up_to} needs jets beyond depth {domain.jet_depth}")
    if up_to > chart.type_m:
        raise PreconditionError(f"up_to={up_to} exceeds the chart type {chart.type_m}")
    _check_chart(domain, chart, z)
    return _coefficients_unchecked(domain, chart.frame, z, up_to, chart.center)


def _coefficients_unchecked(domain, frame, z, up_to, center=None) -> CatlinCoefficients:
    fns = _chart_functions(domain, frame, max(up_to, 2))
    vals = fns.coeffs(*_frame_coords(frame, z))
    shape = np.shape(z)[:-1]
    raw = {k: np.broadcast_to(np.asarray(v, dtype=complex), shape) for k, v in zip(fns.keys, vals)}
    values = {}
    for l in range(2, up_to + 1):
        values[l] = np.max(np.stack([np.abs(raw[(j, l - j)]) for j in range(1, l)]), axis=0)
    return CatlinCoefficients(center, values, raw)


def _tangential_factor(coeffs: CatlinCoefficients, delta, up_to) -> np.ndarray:
    return sum((coeffs.values[l] / delta) ** (1.0 / l) for l in range(2, up_to + 1))


def catlin_metric(domain: DomainModel, chart: ReferenceChart, z, X) -> np.ndarray:
    """M_xi(z, X) = |b2|/|r| + |b1| sum_l (C_l / |r|)^(1/l), X = b1 L1 + b2 L2."""
    z = _check_bbox(domain, z)
    X = np.asarray(X, dtype=complex)
    _check_chart(domain, chart, z)
    fns = _chart_functions(domain, chart.frame, chart.type_m)
    q = np.broadcast_to(fns.q(*_frame_coords(chart.frame, z)), z.shape[:-1])
    aq = np.abs(q)
    cond = ((aq + np.sqrt(aq**2 + 4)) / 2) ** 2
    if np.any(cond > MAX_FRAME_COND):
        raise ChartError(f"frame condition number {float(np.max(cond)):.3g} too large")
    Xw = np.einsum("ij,...j->...i", chart.frame, X)
    b1 = Xw[..., 0]
    b2 = Xw[..., 1] + q * Xw[..., 0]
    absr = np.abs(domain.r_of_real(to_real(z)))
    co = _coefficients_unchecked(domain, chart.frame, z, chart.type_m, chart.center)
    return np.abs(b2) / absr + np.abs(b1) * _tangential_factor(co, absr, chart.type_m)


def frame_basis_coefficients(domain, chart, z, X):
    """(b1, b2) with X = b1 L1 + b2 L2 in the chart frame."""
    fns = _chart_functions(domain, chart.frame, 2)
    q = np.broadcast_to(fns.q(*_frame_coords(chart.frame, z)), np.shape(z)[:-1])
    Xw = np.einsum("ij,...j->...i", chart.frame, np.asarray(X, dtype=complex))
    return Xw[..., 0], Xw[..., 1] + q * Xw[..., 0]


def catlin_metric_split(domain: DomainModel, chart: ReferenceChart, z, X, extrapolate=False):
    """M~_xi(z, X) = |X_N|/delta + |X_H| sum_l (C_l/delta)^(1/l)."""
    z = _check_bbox(domain, z)
    sp_ = tangent_split(domain, z, X, extrapolate=extrapolate)
    _check_chart(domain, chart, z)
    co = _coefficients_unchecked(domain, chart.frame, z, chart.type_m, chart.center)
    d = sp_.delta
    return cnorm(sp_.x_n) / d + cnorm(sp_.x_h) * _tangential_factor(co, d, chart.type_m)


# ---------------------------------------------------------------------------
# patched global metric


def _bump_weight(delta, eps):
    """1 on delta <= eps, 0 on delta >= BLEND_FACTOR * eps, C-infinity in between."""
    s = np.clip((np.asarray(delta) - eps) / ((BLEND_FACTOR - 1.0) * eps), 0.0, 1.0)

    def psi(t):
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)

    a, b = psi(1.0 - s), psi(s)
    return a / (a + b)


def chart_groups(domain: DomainModel) -> dict:
    """Charts grouped by (frame, type); coefficients only depend on these."""
    groups: dict = {}
    for c in domain.charts:
        groups.setdefault((c.frame_name, c.type_m), []).append(c)
    return groups


_group_trees: dict = {}


def _group_tree(charts):
    key = tuple(id(c) for c in charts)
    tree = _group_trees.get(key)
    if tree is None:
        tree = cKDTree(to_real(np.array([c.center for c in charts])))
        _group_trees[key] = tree
    return tree


def group_membership(domain: DomainModel, z, charts) -> np.ndarray:
    """Mask of points lying in at least one chart of a (frame, type) group."""
    z = np.asarray(z, dtype=complex)
    radii = {c.radius for c in charts}
    if len(radii) == 1:
        d, _ = _group_tree(charts).query(to_real(z), distance_upper_bound=radii.pop() * (1 + 1e-12))
        inside = np.isfinite(d)
    else:
        centers = np.array([c.center for c in charts])
        dist = cnorm(z[..., None, :] - centers)
        inside = np.any(dist <= np.array([c.radius for c in charts]), axis=-1)
    if np.any(inside):
        c0 = charts[0]
        dr = np.einsum("ij,...j->...i", c0.frame.conj(), domain.d_r(z[inside]))
        inside[inside] = np.abs(dr[..., 0]) <= c0.max_slope * np.abs(dr[..., 1])
    return inside


@dataclass
class PointGeometry:
    """Per-point data shared by every metric evaluation on a batch."""

    z: np.ndarray
    delta: np.ndarray
    split: TangentSplit
    tangential: np.ndarray  # max over covering charts of sum_l (C_l/delta)^(1/l)
    covered: np.ndarray
    c_values: dict = field(default_factory=dict)  # l -> max over charts of C_l


def point_geometry(domain: DomainModel, z, X, need_tangential=True, delta_limit=None, with_c=False):
    z = np.asarray(z, dtype=complex)
    X = np.asarray(X, dtype=complex)
    xi, dist = nearest_boundary_point(domain, z)
    split = tangent_split(domain, z, X, extrapolate=True, _proj=(xi, dist))
    tang = np.zeros(dist.shape)
    covered = np.zeros(dist.shape, dtype=bool)
    cvals: dict = {}
    if need_tangential:
        active = np.ones(dist.shape, dtype=bool) if delta_limit is None else dist < delta_limit
        for (fname, m), charts in chart_groups(domain).items():
            inside = group_membership(domain, z, charts) & active
            if not np.any(inside):
                continue
            frame = charts[0].frame
            co = _coefficients_unchecked(domain, frame, z[inside], m)
            t = _tangential_factor(co, dist[inside], m)
            tang[inside] = np.maximum(tang[inside], t)
            covered |= inside
            if with_c:
                for l, v in co.values.items():
                    cur = cvals.setdefault(l, np.zeros(dist.shape))
                    cur[inside] = np.maximum(cur[inside], v)
    return PointGeometry(z, dist, split, tang, covered, cvals)


_seam_cache: dict = {}


def seam_constant(domain: DomainModel, n: int = 400, seed: int = 7) -> float:
    """Median of M~(z, X)/|X| over seam points (delta = collar width)."""
    key = (domain.name, domain.collar_eps, n, seed)
    if key in _seam_cache:
        return _seam_cache[key]
    eps = domain.collar_eps
    rng = np.random.default_rng(seed)
    xi = sample_boundary(domain, 4 * n, seed=seed)
    nrm = to_real(unit_normal_at(domain, xi))
    z = to_complex(to_real(xi) - eps * nrm)
    z = z[domain.contains(z)]
    _, d = nearest_boundary_point(domain, z)
    z = z[np.abs(d - eps) < 0.05 * eps][:n]
    X = rng.standard_normal((len(z), 2)) + 1j * rng.standard_normal((len(z), 2))
    X /= cnorm(X)[:, None]
    g = point_geometry(domain, z, X)
    g.tangential[~g.covered] = np.nan
    vals = cnorm(g.split.x_n) / g.delta + cnorm(g.split.x_h) * g.tangential
    c = float(np.nanmedian(vals))
    _seam_cache[key] = c
    return c


def patched_from_geometry(domain: DomainModel, g: PointGeometry, X, delta=None) -> np.ndarray:
    d = g.delta if delta is None else delta
    eps = domain.collar_eps
    w = _bump_weight(d, eps)
    need = w > 0
    if np.any(need & ~g.covered):
        raise ChartError("collar point not covered by any reference chart")
    with np.errstate(divide="ignore", invalid="ignore"):
        mt = cnorm(g.split.x_n) / d + cnorm(g.split.x_h) * g.tangential
    mt = np.where(need, mt, 0.0)
    interior = seam_constant(domain) * cnorm(X)
    return np.where(w >= 1.0, mt, w * mt + (1.0 - w) * interior)


def patched_metric(domain: DomainModel, z, X) -> np.ndarray:
    """Global metric: max over covering charts of M~ on the collar, blended
    to seam_constant * |X| over delta in [eps, 1.5 eps]."""
    z = _check_bbox(domain, z)
    if not np.all(domain.contains(z)):
        raise DomainMembershipError(f"point not in {domain.name}")
    X = np.asarray(X, dtype=complex)
    g = point_geometry(domain, z, X, delta_limit=BLEND_FACTOR * domain.collar_eps)
    return patched_from_geometry(domain, g, X)


def comparison_metrics(domain: DomainModel, z, X, exponent_m: int | None = None):
    """(|X_N|/d + |X_H|/d^(1/m), |X_N|/d + |X_H|/d^(1/2)) with constant 1."""
    z = _check_bbox(domain, z)
    sp_ = tangent_split(domain, z, X)
    m = domain.type_m if exponent_m is None else exponent_m
    d = sp_.delta
    xn, xh = cnorm(sp_.x_n), cnorm(sp_.x_h)
    return xn / d + xh / d ** (1.0 / m), xn / d + xh / d**0.5


# ---------------------------------------------------------------------------
# metric fields

Kind = Literal["catlin_local", "catlin_patched", "lower_comparison", "upper_comparison", "normal_only", "euclidean"]


@dataclass(frozen=True)
class CapWindow:
    """Euclidean ball U = B(center, radius); delta_{Omega cap U} = min(delta, radius - |z - center|)."""

    center: np.ndarray
    radius: float

    def distance(self, z) -> np.ndarray:
        return self.radius - cnorm(np.asarray(z) - self.center)

    def ball_metric(self, kind: str) -> "MetricField":
        """The ``kind`` metric of U itself: the unit-ball fixture pulled back by
        z -> (z - center) / radius."""
        from .fixtures import load_domain

        return MetricField(kind, load_domain("ball"))

    def evaluate(self, kind: str, z, X):
        u = (np.asarray(z) - self.center) / self.radius
        return self.ball_metric(kind)(u, np.asarray(X) / self.radius)


@dataclass(frozen=True)
class MetricField:
    """Evaluatable Finsler metric F(z, X), vectorised over leading axes.

    ``window`` restricts the domain to Omega cap U. The metric of the
    intersection is max(F_Omega, F_U), with F_U the same construction on the
    ball U; the Kobayashi metric of an intersection dominates both, and is
    comparable to their max near the boundary.
    """

    kind: str
    domain: DomainModel
    exponent_m: int | None = None
    chart: ReferenceChart | None = None
    window: CapWindow | None = None

    def __post_init__(self):
        if self.kind not in Kind.__args__:
            raise ValueError(f"unknown metric kind {self.kind!r}")
        if self.kind == "catlin_local" and self.chart is None:
            raise ValueError("catlin_local needs a reference chart")
        if self.kind == "catlin_local" and self.window is not None:
            raise ValueError("a windowed metric must be global")
        if self.exponent_m is None:
            object.__setattr__(self, "exponent_m", self.domain.type_m)

    def delta(self, z) -> np.ndarray:
        d = nearest_boundary_point(self.domain, z)[1]
        if self.window is not None:
            d = np.minimum(d, self.window.distance(z))
        return d

    def contains(self, z) -> np.ndarray:
        inside = self.domain.contains(z)
        if self.window is not None:
            inside &= self.window.distance(z) > 0
        return inside

    def __call__(self, z, X) -> np.ndarray:
        return self.evaluate(z, X)[0]

    def evaluate(self, z, X):
        """``(F(z, X), delta(z))``; the boundary distance comes for free."""
        z = np.asarray(z, dtype=complex)
        X = np.asarray(X, dtype=complex)
        z, X = np.broadcast_arrays(z, X)
        shape = z.shape[:-1]
        z2 = z.reshape(-1, 2)
        X2 = X.reshape(-1, 2)
        if len(z2) and not np.all(self.contains(z2)):
            raise DomainMembershipError(f"metric evaluated outside {self.domain.name}")
        if self.kind == "euclidean":
            return cnorm(X), self.delta(z2).reshape(shape)
        out, d = self._evaluate(z2, X2)
        if self.window is not None:
            out = np.maximum(out, self.window.evaluate(self.kind, z2, X2))
            d = np.minimum(d, self.window.distance(z2))
        if not np.all(np.isfinite(out)):
            raise NumericError("non-finite metric value")
        return out.reshape(shape), d.reshape(shape)

    def _evaluate(self, z, X):
        dom = self.domain
        need_t = self.kind in ("catlin_local", "catlin_patched")
        if self.kind == "catlin_local":
            g = point_geometry(dom, z, X, need_tangential=False)
            co = _coefficients_unchecked(dom, self.chart.frame, z, self.chart.type_m)
            d = g.delta
            return cnorm(g.split.x_n) / d + cnorm(g.split.x_h) * _tangential_factor(co, d, self.chart.type_m), d
        g = point_geometry(dom, z, X, need_tangential=False)
        d = g.delta
        xn, xh = cnorm(g.split.x_n), cnorm(g.split.x_h)
        if self.kind == "normal_only":
            return xn / d, d
        if self.kind == "lower_comparison":
            return xn / d + xh / d ** (1.0 / self.exponent_m), d
        if self.kind == "upper_comparison":
            return xn / d + xh / d**0.5, d
        assert need_t
        # catlin_patched
        limit = BLEND_FACTOR * dom.collar_eps
        active = d < limit
        tang = np.zeros(len(z))
        covered = np.zeros(len(z), dtype=bool)
        for (_, m), charts in chart_groups(dom).items():
            inside = group_membership(dom, z, charts) & active
            if not np.any(inside):
                continue
            co = _coefficients_unchecked(dom, charts[0].frame, z[inside], m)
            tang[inside] = np.maximum(tang[inside], _tangential_factor(co, d[inside], m))
            covered |= inside
        g.tangential = tang
        g.covered = covered
        return patched_from_geometry(dom, g, X, delta=d), d


def metric_sample_rows(metric: MetricField, z, X):
    """Rows for the metric-sample CSV, ordered by sample index."""
    z = np.asarray(z, dtype=complex)
    X = np.asarray(X, dtype=complex)
    values = metric(z, X)
    g = point_geometry(metric.domain, z, X, with_c=True, delta_limit=BLEND_FACTOR * metric.domain.collar_eps)
    m = metric.domain.type_m
    header = ["index", "z1_re", "z1_im", "z2_re", "z2_im", "X1_re", "X1_im", "X2_re", "X2_im",
              "kind", "value", "delta"] + [f"C_{l}" for l in range(2, m + 1)]
    rows = []
    for i in range(len(z)):
        row = [i, *to_real(z[i]), *to_real(X[i]), metric.kind, values[i], g.delta[i]]
        row += [g.c_values.get(l, np.zeros(len(z)))[i] for l in range(2, m + 1)]
        rows.append(row)
    return header, rows


def write_metric_samples(path, metric: MetricField, z, X) -> None:
    header, rows = metric_sample_rows(metric, z, X)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, (float, np.floating)) else v for v in row])


__all__ = [
    "CatlinCoefficients",
    "CapWindow",
    "MetricField",
    "catlin_coefficients",
    "catlin_metric",
    "catlin_metric_split",
    "comparison_metrics",
    "patched_metric",
    "seam_constant",
    "vector_field_L1",
    "write_metric_samples",
    "CollarError",
]
