"""Sparse polynomials in four (commuting) variables.

Used in two coordinate systems: Wirtinger variables ``(z1, zb1, z2, zb2)``
treated as independent, and real coordinates ``(x1, y1, x2, y2)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import sympy as sp

WIRTINGER_SYMBOLS = sp.symbols("z1 zb1 z2 zb2")
REAL_SYMBOLS = sp.symbols("x1 y1 x2 y2", real=True)


@dataclass(frozen=True)
class Poly:
    exps: np.ndarray  # (n_terms, 4) non-negative ints
    coeffs: np.ndarray  # (n_terms,) complex

    @classmethod
    def from_dict(cls, terms: dict) -> "Poly":
        items = [(tuple(int(e) for e in k), complex(v)) for k, v in terms.items() if v != 0]
        if not items:
            return cls(np.zeros((0, 4), dtype=int), np.zeros(0, dtype=complex))
        items.sort()
        exps = np.array([k for k, _ in items], dtype=int)
        coeffs = np.array([v for _, v in items], dtype=complex)
        return cls(exps, coeffs)

    @classmethod
    def from_sympy(cls, expr, symbols) -> "Poly":
        p = sp.Poly(sp.expand(expr), *symbols)
        return cls.from_dict({k: complex(v) for k, v in p.terms()})

    def to_sympy(self, symbols):
        out = sp.Integer(0)
        for e, c in zip(self.exps, self.coeffs):
            cc = sp.nsimplify(c.real) + sp.I * sp.nsimplify(c.imag)
            term = cc
            for s, k in zip(symbols, e):
                term = term * s ** int(k)
            out += term
        return sp.expand(out)

    def as_dict(self) -> dict:
        return {tuple(int(x) for x in e): complex(c) for e, c in zip(self.exps, self.coeffs)}

    @property
    def degree(self) -> int:
        return int(self.exps.sum(axis=1).max()) if len(self.coeffs) else 0

    def diff(self, orders) -> "Poly":
        orders = np.asarray(orders, dtype=int)
        keep = np.all(self.exps >= orders, axis=1)
        exps = self.exps[keep]
        coeffs = self.coeffs[keep].copy()
        for i, k in enumerate(orders):
            for j in range(k):
                coeffs = coeffs * (exps[:, i] - j)
        return Poly(exps - orders, coeffs)

    def __call__(self, v0, v1, v2, v3):
        """Evaluate on broadcastable arrays (or any ring supporting + and *).

        Real arguments with real coefficients are evaluated in float arithmetic.
        """
        vs = (v0, v1, v2, v3)
        if not isinstance(v0, (np.ndarray, complex, float, int)):
            return self._eval_generic(vs)
        vs = [np.asarray(v) for v in vs]
        shape = np.broadcast_shapes(*[v.shape for v in vs])
        real = not np.any(self.coeffs.imag) and not any(np.iscomplexobj(v) for v in vs)
        dtype = float if real else complex
        if not len(self.coeffs):
            return np.zeros(shape, dtype=dtype)
        coeffs = self.coeffs.real if real else self.coeffs
        max_deg = self.exps.max(axis=0)
        powers = []
        for v, d in zip(vs, max_deg):
            p = [None, v]
            for _ in range(int(d) - 1):
                p.append(p[-1] * v)
            powers.append(p)
        out = np.zeros(shape, dtype=dtype)
        for e, c in zip(self.exps, coeffs):
            term = c
            for i in range(4):
                if e[i]:
                    term = term * powers[i][e[i]]
            out = out + term
        return out

    def _eval_generic(self, vs):
        out = 0
        for e, c in zip(self.exps, self.coeffs):
            term = c.real if c.imag == 0 else c
            for v, k in zip(vs, e):
                for _ in range(int(k)):
                    term = v * term
            out = term + out
        return out


def wirtinger_to_real(p: Poly) -> Poly:
    """Substitute z = x + iy, zb = x - iy and expand."""
    x1, y1, x2, y2 = REAL_SYMBOLS
    z1, zb1, z2, zb2 = WIRTINGER_SYMBOLS
    expr = p.to_sympy(WIRTINGER_SYMBOLS).subs(
        {z1: x1 + sp.I * y1, zb1: x1 - sp.I * y1, z2: x2 + sp.I * y2, zb2: x2 - sp.I * y2},
        simultaneous=True,
    )
    return Poly.from_sympy(expr, REAL_SYMBOLS)
