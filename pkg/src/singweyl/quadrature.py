"""Graded composite Gauss-Legendre grids on (0, b].

Panels are dyadic, [b 2^-(m+1), b 2^-m]. Below the Frobenius start
x0 = b 2^-m0 every dyadic panel is used as is (the integrands there are
power/log-power laws evaluated from series). Above x0 each dyadic panel is
split into equal sub-panels no wider than ``h`` so oscillatory integrands stay
resolved. Panel edges carry zero weight but are kept as sample points so
Wronskians can be read off at x0 and b, and so ladder cut-offs b 2^-m are
exact grid points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


@dataclass(frozen=True)
class Grid:
    b: float
    m0: int
    h: float
    n_gl: int
    deep_levels: int
    x: np.ndarray
    w: np.ndarray

    @classmethod
    def build(cls, b: float, m0: int, h: float, n_gl: int = 16, deep_levels: int = 90) -> "Grid":
        nodes, wts = gauss_legendre(n_gl)
        edges = [b * 2.0 ** (-m) for m in range(m0 + deep_levels, m0 - 1, -1)]
        for m in range(m0 - 1, -1, -1):
            lo, hi = b * 2.0 ** (-m - 1), b * 2.0 ** (-m)
            k = max(1, math.ceil((hi - lo) / h))
            edges.extend(lo + (hi - lo) * np.arange(1, k + 1) / k)
        edges = np.array(edges)
        edges[-1] = b
        lo, hi = edges[:-1], edges[1:]
        half = 0.5 * (hi - lo)
        px = (0.5 * (hi + lo))[:, None] + half[:, None] * nodes[None, :]
        pw = half[:, None] * wts[None, :]
        x = np.concatenate([edges, px.ravel()])
        w = np.concatenate([np.zeros(edges.size), pw.ravel()])
        order = np.argsort(x, kind="stable")
        return cls(b, m0, float(h), n_gl, deep_levels, x[order], w[order])

    @property
    def x0(self) -> float:
        return self.b * 2.0 ** (-self.m0)

    @property
    def series_mask(self) -> np.ndarray:
        return self.x <= self.x0

    @property
    def ode_mask(self) -> np.ndarray:
        return self.x >= self.x0

    def index(self, x: float) -> int:
        i = int(np.argmin(np.abs(self.x - x)))
        if not math.isclose(self.x[i], x, rel_tol=1e-13, abs_tol=0.0):
            raise ValueError(f"x = {x} is not a grid point")
        return i

    @property
    def i0(self) -> int:
        return self.index(self.x0)

    @property
    def ib(self) -> int:
        return self.x.size - 1

    def integrate(self, values: np.ndarray, lower: float | None = None) -> np.ndarray:
        """Quadrature over the last axis; ``lower`` must be a panel edge."""
        w = self.w if lower is None else np.where(self.x >= lower, self.w, 0.0)
        return values @ w

    def ladder(self, levels: int) -> np.ndarray:
        return np.array([self.b * 2.0 ** (-m) for m in range(1, levels + 1)])

    def same_as(self, other: "Grid") -> bool:
        return (self.b, self.m0, self.h, self.n_gl, self.deep_levels) == (
            other.b, other.m0, other.h, other.n_gl, other.deep_levels)


def graded_nodes(center: float, half: float, width: float, n_gl: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre rule on [center - half, center + half] graded towards center.

    Panel edges sit at center +- width 2^m, so a feature of size ``width``
    at the center is resolved at every scale.
    """
    nodes, wts = gauss_legendre(n_gl)
    steps = [0.0]
    d = width / 4.0
    while d < half:
        steps.append(d)
        d *= 2.0
    steps.append(half)
    s = np.array(steps)
    edges = np.concatenate([center - s[:0:-1], center + s])
    lo, hi = edges[:-1], edges[1:]
    mid, rad = 0.5 * (lo + hi), 0.5 * (hi - lo)
    x = (mid[:, None] + rad[:, None] * nodes[None, :]).ravel()
    w = (rad[:, None] * wts[None, :]).ravel()
    return x, w
