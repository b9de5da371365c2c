"""Reference values computed without the package: symbolic Levi-form
expansions, closed-form ball distances, brute-force projections and
four-point enumeration."""

from __future__ import annotations

import itertools
import math

import numpy as np
import sympy as sp
from scipy.optimize import minimize_scalar

Z1, ZB1, Z2, ZB2 = sp.symbols("z1 zb1 z2 zb2")


def egg_r(k: int):
    """|z1|^(2k) + |z2|^2 - 1 with z and zbar as independent symbols."""
    return (Z1 * ZB1) ** k + Z2 * ZB2 - 1


def ball_r():
    return Z1 * ZB1 + Z2 * ZB2 - 1


def levi_coefficients(r, up_to: int, point) -> dict:
    """(j, k) -> L_{j,k} at ``point`` = (z1, z2), by direct symbolic expansion.

    L1 = d/dz1 - (r_z2)^-1 r_z1 d/dz2 and its conjugate; the seed is the Levi
    form ddbar r(L1, L1bar), then L1 is applied j-1 times after L1bar k-1 times.
    """
    rz1, rz2 = sp.diff(r, Z1), sp.diff(r, Z2)
    rzb1, rzb2 = sp.diff(r, ZB1), sp.diff(r, ZB2)
    a = -rz1 / rz2  # L1 = d1 + a d2
    ab = -rzb1 / rzb2  # conjugate field
    L = lambda f: sp.diff(f, Z1) + a * sp.diff(f, Z2)  # noqa: E731
    Lb = lambda f: sp.diff(f, ZB1) + ab * sp.diff(f, ZB2)  # noqa: E731
    coef = [1, a]
    coefb = [1, ab]
    zs, zbs = (Z1, Z2), (ZB1, ZB2)
    levi = sum(sp.diff(r, zs[i], zbs[j]) * coef[i] * coefb[j] for i in range(2) for j in range(2))
    subs = {Z1: point[0], ZB1: np.conj(point[0]), Z2: point[1], ZB2: np.conj(point[1])}
    out = {}
    for total in range(2, up_to + 1):
        for j in range(1, total):
            k = total - j
            f = levi
            for _ in range(k - 1):
                f = Lb(f)
            for _ in range(j - 1):
                f = L(f)
            out[(j, k)] = complex(sp.N(f.subs(subs)))
    return out


def levi_C(r, up_to: int, point) -> dict:
    raw = levi_coefficients(r, up_to, point)
    return {l: max(abs(v) for (j, k), v in raw.items() if j + k == l) for l in range(2, up_to + 1)}


def ball_normal_distance(t1: float, t2: float) -> float:
    """Distance for |X_N|/delta along a radius between depths t1 and t2."""
    return abs(math.log(t2 / t1))


def ball_kobayashi_radial(a: float, b: float) -> float:
    return abs(math.atanh(b) - math.atanh(a))


def egg_moduli_distance(k: int, a: float, b: float) -> float:
    """Boundary distance of a point with moduli (a, b) in |z1|^(2k) + |z2|^2 < 1.

    The nearest point shares the arguments, so this is a one-dimensional
    minimization over the boundary curve rho -> (rho, sqrt(1 - rho^(2k))),
    refined from a dense scan.
    """
    f = lambda rho: math.hypot(a - rho, b - math.sqrt(max(0.0, 1 - rho ** (2 * k))))  # noqa: E731
    grid = np.linspace(0.0, 1.0, 20001)
    vals = [f(g) for g in grid]
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-14})
    return min(res.fun, vals[i])


def four_point_delta(d, points=None) -> float:
    """max over ordered 4-tuples of min{(x|z)_w, (z|y)_w} - (x|y)_w, clamped at 0."""
    n = len(d)
    idx = range(n) if points is None else points
    g = lambda a, b, w: 0.5 * (d[a][w] + d[b][w] - d[a][b])  # noqa: E731
    best = 0.0
    for x, y, z, w in itertools.permutations(idx, 4):
        best = max(best, min(g(x, z, w), g(z, y, w)) - g(x, y, w))
    return best
