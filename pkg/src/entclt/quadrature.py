"""Tensor-product quadrature for smoothed pairs.

Pair densities are sums of separable Gaussians, so on a tensor grid the
density and both partial derivatives are three matrix products.  Each axis
factor is rescaled by its column maximum, which keeps the products finite far
into the tails; points where the scaled product still underflows are
re-evaluated pointwise in the log domain.

When the grid steps satisfy ``a * hx == b * hy`` the weighted sum
``a x + b y`` only takes values on a 1-D lattice, so the score of the sum is
evaluated once per lattice point instead of once per grid point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .smoothed import LOG_2PI, WINDOW_SDS, _BLOCK

PAIR_NODES_PER_SD = 8.0
MAX_AXIS_NODES = 6000


@dataclass(frozen=True, eq=False)
class PairGrid:
    xs: np.ndarray
    ys: np.ndarray
    wx: np.ndarray
    wy: np.ndarray
    # (a, b, z0, hz) when a*xs + b*ys lies on the lattice z0 + k*hz
    lattice: tuple | None = None

    @property
    def shape(self):
        return self.xs.size, self.ys.size

    def integrate(self, values):
        return float(self.wx @ values @ self.wy)


def _trap_weights(n, h):
    w = np.full(n, h)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def _axis(lo, hi, h):
    n = int(math.ceil((hi - lo) / h)) + 1
    if n > MAX_AXIS_NODES:
        raise DomainError(f"axis needs {n} nodes (cap {MAX_AXIS_NODES})")
    return lo + h * np.arange(n), _trap_weights(n, h)


def pair_window(P, sds=WINDOW_SDS):
    sx, sy = math.sqrt(P.tau), math.sqrt(P.tau_y)
    return ((float(P.s.min()) - sds * sx, float(P.s.max()) + sds * sx),
            (float(P.t.min()) - sds * sy, float(P.t.max()) + sds * sy))


def pair_grid(P, a=None, b=None, nodes_per_sd=PAIR_NODES_PER_SD,
              sds=WINDOW_SDS):
    """Tensor grid over the standard window of ``P``.

    With ``a, b > 0`` the steps are chosen so ``a x + b y`` is a lattice.
    """
    (xlo, xhi), (ylo, yhi) = pair_window(P, sds)
    hmax = min(math.sqrt(P.tau), math.sqrt(P.tau_y)) / nodes_per_sd
    if a is not None and b is not None and a > 0 and b > 0:
        hz = hmax * min(a, b)
        hx, hy = hz / a, hz / b
        try:
            xs, wx = _axis(xlo, xhi, hx)
            ys, wy = _axis(ylo, yhi, hy)
            return PairGrid(xs, ys, wx, wy, (a, b, a * xlo + b * ylo, hz))
        except DomainError:
            # very unequal weights: the lattice would be too fine, use a plain grid
            pass
    xs, wx = _axis(xlo, xhi, hmax)
    ys, wy = _axis(ylo, yhi, hmax)
    return PairGrid(xs, ys, wx, wy)


def square_grid(xlim, ylim, h):
    xs, wx = _axis(*xlim, h)
    ys, wy = _axis(*ylim, h)
    return PairGrid(xs, ys, wx, wy)


@dataclass(frozen=True, eq=False)
class PairFields:
    """log-density and partial scores of a pair on a tensor grid."""

    logp: np.ndarray
    rho1: np.ndarray
    rho2: np.ndarray

    @property
    def p(self):
        return np.exp(self.logp)


def _axis_factors(nodes, centres, var):
    # rows: atoms, columns: nodes
    d = nodes[None, :] - centres[:, None]
    e = -(d * d) / (2.0 * var)
    top = e.max(axis=0)
    return np.exp(e - top), d, top


def pair_fields(P, grid):
    """Evaluate ``log p``, ``rho^(1)``, ``rho^(2)`` of ``P`` on ``grid``."""
    xs, ys = grid.xs, grid.ys
    n = P.weights.size
    chunk = max(1, _BLOCK // max(xs.size, ys.size))
    # global column maxima first so chunks share a common scale
    topx = np.full(xs.size, -np.inf)
    topy = np.full(ys.size, -np.inf)
    for lo in range(0, n, chunk):
        sl = slice(lo, lo + chunk)
        dx = xs[None, :] - P.s[sl, None]
        dy = ys[None, :] - P.t[sl, None]
        topx = np.maximum(topx, (-(dx * dx) / (2 * P.tau)).max(axis=0))
        topy = np.maximum(topy, (-(dy * dy) / (2 * P.tau_y)).max(axis=0))
    p0 = np.zeros(grid.shape)
    p1 = np.zeros(grid.shape)
    p2 = np.zeros(grid.shape)
    for lo in range(0, n, chunk):
        sl = slice(lo, lo + chunk)
        dx = xs[None, :] - P.s[sl, None]
        dy = ys[None, :] - P.t[sl, None]
        ax = np.exp(-(dx * dx) / (2 * P.tau) - topx) * P.weights[sl, None]
        ay = np.exp(-(dy * dy) / (2 * P.tau_y) - topy)
        p0 += ax.T @ ay
        p1 += (ax * dx).T @ ay
        p2 += ax.T @ (ay * dy)
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = (np.log(p0) + topx[:, None] + topy[None, :]
                - LOG_2PI - 0.5 * math.log(P.tau * P.tau_y))
        rho1 = -p1 / (p0 * P.tau)
        rho2 = -p2 / (p0 * P.tau_y)
    bad = ~(p0 > 1e-250)
    if bad.any():
        ix, iy = np.nonzero(bad)
        lp, r1, r2 = P.evaluate(xs[ix], ys[iy])
        logp[bad], rho1[bad], rho2[bad] = lp, r1, r2
    return PairFields(logp, rho1, rho2)


def sum_score_on_grid(P, grid, a, b):
    """Score of ``a X + b Y`` evaluated at every grid point."""
    law = P.sum_law(a, b)
    nx, ny = grid.shape
    if grid.lattice is not None and np.isclose(grid.lattice[0], a) \
            and np.isclose(grid.lattice[1], b):
        _, _, z0, hz = grid.lattice
        zs = z0 + hz * np.arange(nx + ny - 1)
        rt = law.evaluate(zs)[1]
        return rt[np.add.outer(np.arange(nx), np.arange(ny))]
    if b == 0:
        return np.broadcast_to(law.evaluate(a * grid.xs)[1][:, None], (nx, ny))
    if a == 0:
        return np.broadcast_to(law.evaluate(b * grid.ys)[1][None, :], (nx, ny))
    z = a * grid.xs[:, None] + b * grid.ys[None, :]
    return law.evaluate(z)[1]
