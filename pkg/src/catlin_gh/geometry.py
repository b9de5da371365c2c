"""Defining-function domains in C^2: jets, boundary distance, projection,
complex tangent/normal splitting and point sampling.

Points are complex arrays of shape ``(..., 2)``; the matching real
coordinates are ``(x1, y1, x2, y2)`` with shape ``(..., 4)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    CapabilityError,
    CollarError,
    DomainMembershipError,
    NumericError,
    OutOfChartError,
    SamplingError,
)
from .poly import Poly, wirtinger_to_real

PROJ_TOL = 1e-10
NEWTON_MAX_ITER = 50
BBOX_SLACK = 1e-9


def to_real(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return np.stack([z[..., 0].real, z[..., 0].imag, z[..., 1].real, z[..., 1].imag], axis=-1)


def to_complex(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.stack([x[..., 0] + 1j * x[..., 1], x[..., 2] + 1j * x[..., 3]], axis=-1)


def hermitian(a, b) -> np.ndarray:
    """<a, b> = sum a_k conj(b_k) over the last axis."""
    return np.sum(np.asarray(a) * np.conj(b), axis=-1)


def cnorm(a) -> np.ndarray:
    return np.sqrt(np.sum(np.abs(np.asarray(a)) ** 2, axis=-1))


@dataclass(frozen=True)
class ReferenceChart:
    """Boundary reference point with a unitary frame ``w = frame @ z``.

    In frame coordinates the defining function must have a non-vanishing
    ``d r / d w2`` on the chart ball.
    """

    center: np.ndarray  # complex (2,)
    type_m: int
    frame: np.ndarray  # complex (2, 2), unitary
    radius: float
    frame_name: str = "identity"
    max_slope: float = 2.0  # chart requires |dr/dw1| <= max_slope * |dr/dw2|

    def in_ball(self, z) -> np.ndarray:
        return cnorm(np.asarray(z) - self.center) <= self.radius

    def contains(self, z, domain: "DomainModel") -> np.ndarray:
        """Closed chart ball intersected with the well-conditioned frame cone."""
        z = np.asarray(z, dtype=complex)
        shape = z.shape[:-1]
        z = z.reshape(-1, 2)
        inside = self.in_ball(z)
        if np.any(inside):
            dr = np.einsum("ij,...j->...i", self.frame.conj(), domain.d_r(z[inside]))
            inside[inside] = np.abs(dr[..., 0]) <= self.max_slope * np.abs(dr[..., 1])
        return inside.reshape(shape)


@dataclass(frozen=True)
class DomainModel:
    name: str
    r: Poly  # Wirtinger form
    type_m: int
    collar_eps: float
    charts: tuple
    bbox_lo: np.ndarray  # real (4,)
    bbox_hi: np.ndarray
    base_point: np.ndarray  # complex (2,)
    description: str = ""
    conj_symmetric: bool = True
    reinhardt: bool = False  # r depends on |z1|, |z2| only
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def jet_depth(self) -> int:
        return self.type_m + 2

    @property
    def reference_points(self) -> np.ndarray:
        return np.array([c.center for c in self.charts])

    @cached_property
    def r_real(self) -> Poly:
        return wirtinger_to_real(self.r)

    @cached_property
    def _grad_polys(self):
        return [self.r_real.diff(np.eye(4, dtype=int)[i]) for i in range(4)]

    @cached_property
    def _hess_polys(self):
        e = np.eye(4, dtype=int)
        return {(i, j): self.r_real.diff(e[i] + e[j]) for i in range(4) for j in range(i, 4)}

    @cached_property
    def _dbar_polys(self):
        return (self.r.diff((0, 1, 0, 0)), self.r.diff((0, 0, 0, 1)))

    @cached_property
    def _d_polys(self):
        return (self.r.diff((1, 0, 0, 0)), self.r.diff((0, 0, 1, 0)))

    @cached_property
    def inradius(self) -> float:
        return float(boundary_distance(self, self.base_point))

    @cached_property
    def boundary_cloud(self) -> np.ndarray:
        return sample_boundary(self, 4096, seed=12345)

    @cached_property
    def cloud_tree(self) -> cKDTree:
        return cKDTree(to_real(self.boundary_cloud))

    @cached_property
    def _plane_polys(self):
        # sparse terms (i, j, c) of c x1^i x2^j; a handful per polynomial
        def plane(p: Poly) -> tuple:
            keep = (p.exps[:, 1] == 0) & (p.exps[:, 3] == 0)
            acc: dict = {}
            for e, c in zip(p.exps[keep], p.coeffs[keep].real):
                key = (int(e[0]), int(e[2]))
                acc[key] = acc.get(key, 0.0) + float(c)
            return tuple((i, j, c) for (i, j), c in sorted(acc.items()) if c != 0.0)

        e = np.eye(4, dtype=int)
        grads = [plane(self.r_real.diff(e[i])) for i in (0, 2)]
        hess = [plane(self.r_real.diff(e[i] + e[j])) for i, j in ((0, 0), (0, 2), (2, 2))]
        return plane(self.r_real), grads, hess

    @cached_property
    def plane_profile(self):
        theta = np.linspace(0.0, np.pi / 2, PROFILE_ANGLES)
        return theta, _plane_profile(self, theta)

    @cached_property
    def plane_profile_tree(self) -> cKDTree:
        return cKDTree(self.plane_profile[1])

    @cached_property
    def plane_cloud(self) -> np.ndarray:
        return np.abs(self.boundary_cloud)

    @cached_property
    def plane_tree(self) -> cKDTree:
        return cKDTree(self.plane_cloud)

    def r_of_real(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.r_real(x[..., 0], x[..., 1], x[..., 2], x[..., 3]).real

    def grad_real(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        args = (x[..., 0], x[..., 1], x[..., 2], x[..., 3])
        return np.stack([p(*args).real for p in self._grad_polys], axis=-1)

    def hess_real(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        args = (x[..., 0], x[..., 1], x[..., 2], x[..., 3])
        out = np.empty(x.shape[:-1] + (4, 4))
        for (i, j), p in self._hess_polys.items():
            v = p(*args).real
            out[..., i, j] = v
            out[..., j, i] = v
        return out

    def wirt_args(self, z):
        z = np.asarray(z, dtype=complex)
        return z[..., 0], np.conj(z[..., 0]), z[..., 1], np.conj(z[..., 1])

    def dbar_r(self, z) -> np.ndarray:
        """(dr/dzb1, dr/dzb2); real gradient as a complex vector is 2 * dbar_r."""
        args = self.wirt_args(z)
        return np.stack([p(*args) for p in self._dbar_polys], axis=-1)

    def d_r(self, z) -> np.ndarray:
        args = self.wirt_args(z)
        return np.stack([p(*args) for p in self._d_polys], axis=-1)

    def in_bbox(self, z) -> np.ndarray:
        x = to_real(z)
        return np.all((x >= self.bbox_lo - BBOX_SLACK) & (x <= self.bbox_hi + BBOX_SLACK), axis=-1)

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        inside = self.in_bbox(z)
        out = np.zeros(inside.shape, dtype=bool)
        if np.any(inside):
            out[inside] = self.r_of_real(to_real(z[inside])) < 0
        return out


# ---------------------------------------------------------------------------
# Evaluation of r and its jets


def _check_bbox(domain: DomainModel, z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    if z.shape[-1] != 2:
        raise ValueError(f"expected points with trailing dimension 2, got {z.shape}")
    if not np.all(np.isfinite(to_real(z))):
        raise ValueError("non-finite point")
    if not np.all(domain.in_bbox(z)):
        raise OutOfChartError(f"point outside bounding box of {domain.name}")
    return z


def eval_r(domain: DomainModel, z):
    z = _check_bbox(domain, z)
    return domain.r_of_real(to_real(z))


def eval_jet(domain: DomainModel, z, dz1: int, dzbar1: int, dz2: int, dzbar2: int):
    """Mixed Wirtinger derivative of r from the closed-form polynomial."""
    orders = (dz1, dzbar1, dz2, dzbar2)
    if min(orders) < 0:
        raise ValueError("negative derivative order")
    if sum(orders) > domain.jet_depth:
        raise CapabilityError(f"order {sum(orders)} exceeds jet depth {domain.jet_depth}")
    z = _check_bbox(domain, z)
    return domain.r.diff(orders)(*domain.wirt_args(z))


class Bicomplex:
    """a + b*j with a, b complex and j^2 = -1 commuting with i."""

    __slots__ = ("a", "b")

    def __init__(self, a, b=0.0):
        self.a = a
        self.b = b

    def __add__(self, o):
        if isinstance(o, Bicomplex):
            return Bicomplex(self.a + o.a, self.b + o.b)
        return Bicomplex(self.a + o, self.b)

    __radd__ = __add__

    def __mul__(self, o):
        if isinstance(o, Bicomplex):
            return Bicomplex(self.a * o.a - self.b * o.b, self.a * o.b + self.b * o.a)
        return Bicomplex(self.a * o, self.b * o)

    __rmul__ = __mul__


def _real_derivative_cs(domain: DomainModel, x, dirs, h=1e-30):
    """Real directional derivative of r of order len(dirs) <= 2 by complex step."""
    x = np.asarray(x, dtype=float)
    p = domain.r_real
    if len(dirs) == 0:
        return p(*x).real
    if len(dirs) == 1:
        xs = [complex(v) for v in x]
        xs[dirs[0]] += 1j * h
        return p(*xs).imag / h
    # second order: two independent imaginary units (i and j)
    h2 = 1e-20
    xs = [Bicomplex(complex(v)) for v in x]
    xs[dirs[0]] = xs[dirs[0]] + 1j * h2
    xs[dirs[1]] = xs[dirs[1]] + Bicomplex(0.0, h2)
    val = p(*xs)
    return val.b.imag / (h2 * h2)


def complex_step_jet(domain: DomainModel, z, dz1: int, dzbar1: int, dz2: int, dzbar2: int):
    """Wirtinger jet of order <= 2 computed independently by complex-step.

    Derivatives in real coordinates come from (multi)complex steps; they are
    combined with d/dz = (d/dx - i d/dy)/2 and d/dzb = (d/dx + i d/dy)/2.
    """
    orders = (dz1, dzbar1, dz2, dzbar2)
    if sum(orders) > 2:
        raise CapabilityError("complex-step cross-check supports order <= 2")
    x = to_real(np.asarray(z, dtype=complex))
    # each Wirtinger factor is a combination of two real directions
    factors = []
    for var, k in enumerate(orders):
        coord = 2 * (var // 2)
        sign = -1j if var % 2 == 0 else 1j
        factors += [((coord, 0.5), (coord + 1, 0.5 * sign))] * k
    total = 0j
    if not factors:
        return _real_derivative_cs(domain, x, ())
    if len(factors) == 1:
        for d, c in factors[0]:
            total += c * _real_derivative_cs(domain, x, (d,))
        return total
    for d1, c1 in factors[0]:
        for d2, c2 in factors[1]:
            total += c1 * c2 * _real_derivative_cs(domain, x, (d1, d2))
    return total


# ---------------------------------------------------------------------------
# Boundary sampling and nearest-point projection


def sample_boundary(domain: DomainModel, n: int, seed: int = 0) -> np.ndarray:
    """Boundary points along rays from the base point (star-shaped fixtures)."""
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((n, 4))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    base = to_real(domain.base_point)
    # exit parameter of each ray from the bounding box
    with np.errstate(divide="ignore"):
        t_hi = np.where(u > 0, (domain.bbox_hi - base) / u, np.inf)
        t_lo = np.where(u < 0, (domain.bbox_lo - base) / u, np.inf)
    hi = np.min(np.minimum(t_hi, t_lo), axis=1)
    lo = np.zeros(n)
    if np.any(domain.r_of_real(base + hi[:, None] * u) < 0):
        raise NumericError("domain is not contained in its bounding box")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        neg = domain.r_of_real(base + mid[:, None] * u) < 0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    return to_complex(base + (0.5 * (lo + hi))[:, None] * u)


class _PlaneView:
    """r restricted to the real plane (x1, x2); valid for Reinhardt domains,
    whose nearest boundary points share the phases of the target."""

    def __init__(self, domain: DomainModel):
        self.d = domain

    def r_of_real(self, p):
        return _plane_eval(self.d._plane_polys[0], p)

    def grad_real(self, p):
        return np.stack([_plane_eval(q, p) for q in self.d._plane_polys[1]], axis=-1)

    def hess_real(self, p):
        a = [_plane_eval(q, p) for q in self.d._plane_polys[2]]
        return np.stack([np.stack([a[0], a[1]], -1), np.stack([a[1], a[2]], -1)], -2)


def _plane_eval(terms, p) -> np.ndarray:
    x, y = p[..., 0], p[..., 1]
    out = np.zeros(x.shape)
    for i, j, c in terms:
        t = np.full(x.shape, c)
        if i:
            t *= x if i == 1 else x**i
        if j:
            t *= y if j == 1 else y**j
        out += t
    return out


def _newton_projection(domain, target: np.ndarray, seed: np.ndarray):
    """Solve r(xi) = 0, xi - z + lam * grad r(xi) = 0 for a batch (real coords).

    ``domain`` only needs ``r_of_real``, ``grad_real`` and ``hess_real``.
    """
    dim = target.shape[1]
    xi = seed.copy()
    for _ in range(30):
        r = domain.r_of_real(xi)
        g = domain.grad_real(xi)
        gg = np.sum(g * g, axis=1)
        ok = gg > 1e-300
        step = np.where(ok, r / np.where(ok, gg, 1.0), 0.0)
        xi = xi - step[:, None] * g
        if np.all(np.abs(r) < 1e-13):
            break
    g = domain.grad_real(xi)
    gg = np.maximum(np.sum(g * g, axis=1), 1e-300)
    lam = -np.sum((xi - target) * g, axis=1) / gg
    converged = np.zeros(len(xi), dtype=bool)
    act = np.arange(len(xi))
    for _ in range(NEWTON_MAX_ITER):
        x, lm, tg = xi[act], lam[act], target[act]
        r = domain.r_of_real(x)
        g = domain.grad_real(x)
        F = np.concatenate([x - tg + lm[:, None] * g, r[:, None]], axis=1)
        scale = 1.0 + np.linalg.norm(x - tg, axis=1)
        done = (np.abs(r) <= PROJ_TOL) & (np.linalg.norm(F[:, :dim], axis=1) / scale <= 1e-11)
        converged[act[done]] = True
        keep = ~done
        act = act[keep]
        if len(act) == 0:
            break
        x, lm, g, F = x[keep], lm[keep], g[keep], F[keep]
        J = np.zeros((len(act), dim + 1, dim + 1))
        J[:, :dim, :dim] = np.eye(dim) + lm[:, None, None] * domain.hess_real(x)
        J[:, :dim, dim] = g
        J[:, dim, :dim] = g
        with np.errstate(all="ignore"):
            try:
                step = np.linalg.solve(J, -F[..., None])[..., 0]
            except np.linalg.LinAlgError:
                step = np.zeros_like(F)
        step = np.where(np.isfinite(step), step, 0.0)
        xi[act] = x + step[:, :dim]
        lam[act] = lm + step[:, dim]
    r = domain.r_of_real(xi)
    return xi, lam, converged, np.abs(r)


def _dense_seed(domain: DomainModel, target: np.ndarray) -> np.ndarray:
    cloud = to_real(domain.boundary_cloud)
    return cloud[domain.cloud_tree.query(target)[1]]


def _plane_seed(domain: DomainModel, target: np.ndarray) -> np.ndarray:
    cloud = domain.plane_cloud
    return cloud[domain.plane_tree.query(target)[1]]


def _plane_profile(domain: DomainModel, theta: np.ndarray) -> np.ndarray:
    """Boundary points of the moduli quadrant along rays at angles ``theta``."""
    u = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    view = _PlaneView(domain)
    lo = np.zeros(theta.shape)
    hi = np.full(theta.shape, float(np.max(np.abs(np.concatenate([domain.bbox_lo, domain.bbox_hi])))) * 1.5)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        neg = view.r_of_real(mid[..., None] * u) < 0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    return (0.5 * (lo + hi))[..., None] * u


PROFILE_ANGLES = 4097
PROFILE_STRIDE = 16


def _profile_argmin(prof: np.ndarray, target: np.ndarray) -> np.ndarray:
    # coarse brute force, then a local window; a k-d tree degrades for deep points
    coarse = prof[::PROFILE_STRIDE]
    out = np.empty(len(target), dtype=int)
    off = np.arange(-2 * PROFILE_STRIDE, 2 * PROFILE_STRIDE + 1)
    for a in range(0, len(target), 4096):
        t = target[a : a + 4096]
        k = np.argmin(((t[:, None, :] - coarse[None]) ** 2).sum(-1), axis=1) * PROFILE_STRIDE
        idx = np.clip(k[:, None] + off[None], 0, len(prof) - 1)
        d = ((prof[idx] - t[:, None, :]) ** 2).sum(-1)
        out[a : a + 4096] = idx[np.arange(len(t)), np.argmin(d, axis=1)]
    return out


def _plane_polar_search(domain: DomainModel, target: np.ndarray, refine: bool = True) -> np.ndarray:
    """Nearest profile point: dense cached profile, then nested angle refinement."""
    theta, prof = domain.plane_profile
    j = _profile_argmin(prof, target)
    if not refine:
        return prof[j]
    center = theta[j]
    width = 2.0 * (theta[1] - theta[0])
    for _ in range(4):
        th = np.clip(center[:, None] + width * np.linspace(-0.5, 0.5, 17)[None, :], 0.0, np.pi / 2)
        pts = _plane_profile(domain, th)
        k = np.argmin(np.sum((pts - target[:, None, :]) ** 2, axis=-1), axis=1)
        center = th[np.arange(len(target)), k]
        width = 2.0 * width / 16
    return _plane_profile(domain, center)


def _nearest_reinhardt(domain: DomainModel, z: np.ndarray, global_search):
    mod = np.abs(z)
    view = _PlaneView(domain)
    p, _, conv, res = _newton_projection(view, mod, mod.copy())
    p = np.abs(p)
    dist = np.linalg.norm(p - mod, axis=1)
    dist[~conv] = np.inf
    redo = ~conv | ~np.isfinite(dist)
    if global_search is None:
        redo |= dist >= domain.collar_eps
    elif global_search:
        redo[:] = True
    if np.any(redo):
        # the polar search is global in the quadrant; Newton polishes it
        idx = np.flatnonzero(redo)
        t2 = mod[idx]
        seed = _plane_polar_search(domain, t2, refine=False)
        p2, _, conv2, res2 = _newton_projection(view, t2, seed)
        # deep stalls sit near a cut locus; the cached profile is accurate enough there
        shallow = np.linalg.norm(seed - t2, axis=1) < 2.0 * domain.collar_eps
        fix = ~conv2 & shallow
        deep = ~conv2 & ~shallow
        p2[deep] = seed[deep]
        res2[deep] = np.abs(view.r_of_real(seed[deep]))
        conv2[deep] = res2[deep] <= PROJ_TOL
        if np.any(fix):
            seed[fix] = _plane_polar_search(domain, t2[fix])
            p2[fix], _, conv2[fix], res2[fix] = _newton_projection(view, t2[fix], seed[fix])
        p2 = np.where(conv2[:, None], np.abs(p2), seed)
        d2 = np.linalg.norm(p2 - t2, axis=1)
        r2 = np.where(conv2, res2, np.abs(view.r_of_real(seed)))
        better = d2 < dist[idx]
        idx = idx[better]
        p[idx], dist[idx], res[idx] = p2[better], d2[better], r2[better]
        conv[idx] = r2[better] <= PROJ_TOL
    if not np.all(conv):
        raise NumericError("boundary projection did not converge", residual=float(np.max(res[~conv])))
    phase = np.where(mod > 0, z / np.where(mod > 0, mod, 1.0), 1.0)
    return p * phase, dist


def nearest_boundary_point(domain: DomainModel, z, global_search: bool | None = None):
    """Nearest boundary point for a batch of points.

    Returns ``(xi, dist)`` as complex points and real distances. Newton is seeded
    by steepest descent of r; points that stall, or lie beyond the collar
    (where the projection may be non-unique), are also started from the
    argmin over a dense boundary sample and the closer solution is kept.
    """
    z = np.asarray(z, dtype=complex)
    shape = z.shape[:-1]
    if domain.reinhardt:
        xi, dist = _nearest_reinhardt(domain, z.reshape(-1, 2), global_search)
        return xi.reshape(shape + (2,)), dist.reshape(shape)
    target = to_real(z).reshape(-1, 4)
    xi, _, conv, res = _newton_projection(domain, target, target.copy())
    dist = np.linalg.norm(xi - target, axis=1)
    redo = ~conv | ~np.isfinite(dist)
    if global_search is None:
        redo |= dist >= domain.collar_eps
    elif global_search:
        redo[:] = True
    if np.any(redo):
        t2 = target[redo]
        xi2, _, conv2, res2 = _newton_projection(domain, t2, _dense_seed(domain, t2))
        d2 = np.linalg.norm(xi2 - t2, axis=1)
        d_old = np.where(conv[redo], dist[redo], np.inf)
        better = conv2 & (d2 < d_old)
        idx = np.flatnonzero(redo)
        xi[idx[better]] = xi2[better]
        dist[idx[better]] = d2[better]
        conv[idx[better]] = True
        res[idx[better]] = res2[better]
    if not np.all(conv):
        # last resort: several nearby cloud seeds, keep the closest converged one
        bad = np.flatnonzero(~conv)
        _, nn = domain.cloud_tree.query(target[bad], k=16)
        cloud = to_real(domain.boundary_cloud)
        for j in range(nn.shape[1]):
            xi3, _, c3, r3 = _newton_projection(domain, target[bad], cloud[nn[:, j]])
            d3 = np.linalg.norm(xi3 - target[bad], axis=1)
            take = c3 & (~conv[bad] | (d3 < dist[bad]))
            xi[bad[take]], dist[bad[take]], res[bad[take]] = xi3[take], d3[take], r3[take]
            conv[bad[take]] = True
    if not np.all(conv):
        raise NumericError(
            "boundary projection did not converge", residual=float(np.max(res[~conv]))
        )
    return to_complex(xi).reshape(shape + (2,)), dist.reshape(shape)


def boundary_distance(domain: DomainModel, z):
    z = _check_bbox(domain, z)
    if not np.all(domain.contains(z)):
        raise DomainMembershipError(f"point not in {domain.name}")
    return nearest_boundary_point(domain, z)[1]


def project_to_boundary(domain: DomainModel, z):
    z = _check_bbox(domain, z)
    if not np.all(domain.contains(z)):
        raise DomainMembershipError(f"point not in {domain.name}")
    xi, dist = nearest_boundary_point(domain, z)
    if np.any(dist >= domain.collar_eps):
        raise CollarError(f"delta >= collar width {domain.collar_eps}")
    return xi


@dataclass(frozen=True)
class TangentSplit:
    projection: np.ndarray
    unit_normal: np.ndarray
    x_h: np.ndarray
    x_n: np.ndarray
    delta: np.ndarray
    extrapolated: np.ndarray


def unit_normal_at(domain: DomainModel, xi) -> np.ndarray:
    g = domain.dbar_r(xi)
    return g / cnorm(g)[..., None]


def tangent_split(domain: DomainModel, z, X, extrapolate: bool = False, _proj=None) -> TangentSplit:
    """Orthogonal decomposition X = X_H + X_N at the nearest boundary point.

    Beyond the collar a split is still returned when ``extrapolate`` is set
    (flagged in ``extrapolated``); the nearest reference point's normal is
    used if the projection cannot be computed.
    """
    z = np.asarray(z, dtype=complex)
    X = np.asarray(X, dtype=complex)
    if _proj is None:
        z = _check_bbox(domain, z)
        try:
            xi, dist = nearest_boundary_point(domain, z)
        except NumericError:
            if not extrapolate:
                raise
            xi, dist = _reference_fallback(domain, z)
    else:
        xi, dist = _proj
    outside = dist >= domain.collar_eps
    if np.any(outside) and not extrapolate:
        raise CollarError(f"delta >= collar width {domain.collar_eps}")
    n = unit_normal_at(domain, xi)
    bad = ~np.all(np.isfinite(n), axis=-1)
    if np.any(bad):
        xi_f, _ = _reference_fallback(domain, z)
        n = np.where(bad[..., None], unit_normal_at(domain, xi_f), n)
    coef = hermitian(X, n)
    x_n = coef[..., None] * n
    x_h = X - x_n
    return TangentSplit(xi, n, x_h, x_n, dist, np.broadcast_to(outside, dist.shape))


def _reference_fallback(domain: DomainModel, z):
    refs = domain.reference_points
    d = cnorm(np.asarray(z)[..., None, :] - refs)
    i = np.argmin(d, axis=-1)
    return refs[i], np.full(d.shape[:-1], np.inf)


# ---------------------------------------------------------------------------
# Sampling


def sample_interior(
    domain: DomainModel,
    count: int,
    depth_profile: Literal["uniform", "dyadic-collar"] = "uniform",
    seed: int = 0,
    bands: int = 5,
    first_band: int = 1,
    max_tries: int = 200,
) -> np.ndarray:
    """Seeded interior points.

    ``dyadic-collar`` puts equal counts into depth bands
    delta in [2^-(k+1) D, 2^-k D], k = first_band .. first_band + bands - 1,
    with D the inradius (the first ``count % bands`` bands get one extra).
    """
    if count < 1:
        raise SamplingError("count must be >= 1")
    rng = np.random.default_rng(seed)
    if depth_profile == "uniform":
        out = []
        for _ in range(max_tries):
            x = rng.uniform(domain.bbox_lo, domain.bbox_hi, size=(max(4 * count, 64), 4))
            keep = domain.r_of_real(x) < -1e-12
            out.extend(x[keep])
            if len(out) >= count:
                return to_complex(np.array(out[:count]))
        raise SamplingError("rejection sampling exhausted")
    if depth_profile != "dyadic-collar":
        raise ValueError(f"unknown depth profile {depth_profile!r}")
    D = domain.inradius
    per = [count // bands + (1 if i < count % bands else 0) for i in range(bands)]
    out = []
    for b, n_b in enumerate(per):
        if n_b == 0:
            continue
        k = first_band + b
        lo, hi = 2.0 ** (-k - 1) * D, 2.0 ** (-k) * D
        got: list = []
        for _ in range(max_tries):
            m = max(2 * (n_b - len(got)), 16)
            xi = sample_boundary(domain, m, seed=int(rng.integers(2**31)))
            nrm = to_real(unit_normal_at(domain, xi))
            t = rng.uniform(lo, hi, size=m)
            cand = to_complex(to_real(xi) - t[:, None] * nrm)
            ok = domain.contains(cand)
            if not np.any(ok):
                continue
            cand = cand[ok]
            d = nearest_boundary_point(domain, cand)[1]
            cand = cand[(d >= lo) & (d <= hi)]
            got.extend(cand[: n_b - len(got)])
            if len(got) >= n_b:
                break
        if len(got) < n_b:
            raise SamplingError(f"could not fill depth band {k}")
        out.extend(got)
    return np.array(out)
