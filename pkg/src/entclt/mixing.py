"""Dependence coefficients: alpha-mixing, delta_n, and smoothing stability.

``alpha`` of a finite joint law is exact: the row side is enumerated over
all ``2^r`` subsets and, for a fixed row event ``A``, the supremum over
column events has the closed form ``sum_j |P(A, j) - P(A) q_j| / 2`` (the
positive and negative parts of the column discrepancies balance).
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .errors import CapacityError, DomainError
from .quadrature import pair_fields, pair_grid, square_grid
from .smoothed import GridSpec, SmoothedPair, add_noise, add_noise_pair

ENUMERATION_CAP = 16
MAX_COLUMNS = 256
MIN_RECTANGLE_SAMPLES = 1000
DEFAULT_CELLS = 16


@dataclass(frozen=True, eq=False)
class FiniteJointLaw:
    """Joint law of ``(S, T)`` on ``row_states x col_states``."""

    row_states: np.ndarray
    col_states: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.row_states, dtype=float).ravel()
        cols = np.asarray(self.col_states, dtype=float).ravel()
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (rows.size, cols.size):
            raise DomainError(f"probs shape {p.shape} does not match states")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise DomainError("probabilities must be finite and non-negative")
        total = p.sum()
        if abs(total - 1.0) > 1e-9:
            raise DomainError(f"probabilities sum to {total!r}")
        object.__setattr__(self, "row_states", rows)
        object.__setattr__(self, "col_states", cols)
        object.__setattr__(self, "probs", p / total)

    @classmethod
    def product(cls, row_states, p_row, col_states, p_col):
        return cls(row_states, col_states, np.outer(p_row, p_col))

    @property
    def row_marginal(self):
        return self.probs.sum(axis=1)

    @property
    def col_marginal(self):
        return self.probs.sum(axis=0)

    def transpose(self):
        return FiniteJointLaw(self.col_states, self.row_states, self.probs.T)

    def to_smoothed_pair(self, tau):
        i, j = np.nonzero(self.probs > 0)
        atoms = np.column_stack([self.row_states[i], self.col_states[j]])
        return SmoothedPair(atoms, self.probs[i, j], tau)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([""] + [f"{c:.17g}" for c in self.col_states])
            for r, row in zip(self.row_states, self.probs):
                w.writerow([f"{r:.17g}"] + [f"{v:.17g}" for v in row])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
        cols = [float(c) for c in rows[0][1:]]
        states = [float(r[0]) for r in rows[1:]]
        probs = [[float(v) for v in r[1:]] for r in rows[1:]]
        return cls(states, cols, probs)


def base_law(P):
    """Finite joint law of the unsmoothed ``(S, T)`` behind a pair."""
    rows, ri = np.unique(P.s, return_inverse=True)
    cols, ci = np.unique(P.t, return_inverse=True)
    probs = np.zeros((rows.size, cols.size))
    np.add.at(probs, (ri, ci), P.weights)
    return FiniteJointLaw(rows, cols, probs)


def _subset_matrix(r):
    return ((np.arange(1 << r)[:, None] >> np.arange(r)) & 1).astype(float)


def alpha_exact(law):
    """Exact ``sup_{A,B} |P(A x B) - P(A) P(B)|`` of a finite joint law.

    The smaller side is enumerated (at most 16 states); the other side may
    have up to 256 states.
    """
    p = law.probs
    if p.shape[0] > p.shape[1]:
        p = p.T
    r, c = p.shape
    if r > ENUMERATION_CAP or c > MAX_COLUMNS:
        raise CapacityError(f"{p.shape} states exceed the enumeration cap")
    subsets = _subset_matrix(r)
    joint = subsets @ p
    pa = subsets @ p.sum(axis=1)
    dev = joint - pa[:, None] * p.sum(axis=0)[None, :]
    return float(0.5 * np.abs(dev).sum(axis=1).max())


def alpha_estimate_rectangles(s, t, grid=None):
    """Half-line estimate ``max_{a,b} |F(a,b) - F_S(a) F_T(b)|`` from samples.

    Restricting to events ``(-inf, a] x (-inf, b]`` at the grid nodes makes
    this a lower estimate of ``alpha``; refining the grid (a superset of
    nodes) can only increase it.
    """
    s = np.asarray(s, dtype=float).ravel()
    t = np.asarray(t, dtype=float).ravel()
    if s.size != t.size:
        raise DomainError("paired samples must have equal length")
    n = s.size
    if n < MIN_RECTANGLE_SAMPLES:
        raise CapacityError(f"need >= {MIN_RECTANGLE_SAMPLES} pairs, got {n}")
    if grid is None:
        lo = min(s.min(), t.min())
        hi = max(s.max(), t.max())
        if hi <= lo:
            return 0.0
        grid = GridSpec(lo, hi, 129)
    thr = grid.nodes()
    k = thr.size
    # sample counts towards threshold j iff j >= idx
    i_s = np.searchsorted(thr, s, side="left")
    i_t = np.searchsorted(thr, t, side="left")
    counts = np.zeros((k + 1, k + 1))
    np.add.at(counts, (i_s, i_t), 1.0)
    joint = counts.cumsum(axis=0).cumsum(axis=1)[:k, :k] / n
    fs = np.bincount(i_s, minlength=k + 1).cumsum()[:k] / n
    ft = np.bincount(i_t, minlength=k + 1).cumsum()[:k] / n
    return float(np.abs(joint - np.outer(fs, ft)).max())


def quantile_edges(X, cells=DEFAULT_CELLS):
    """Interior cell edges at the ``k/cells`` quantiles of a smoothed scalar."""
    sd = math.sqrt(X.tau)
    lo = float(X.atoms.min()) - 12 * sd
    hi = float(X.atoms.max()) + 12 * sd
    return np.array([brentq(lambda x: float(X.cdf(x)) - q, lo, hi, xtol=1e-12)
                     for q in np.arange(1, cells) / cells])


def _cell_probs(centres, var, edges):
    e = np.concatenate([[-np.inf], edges, [np.inf]])
    cdf = ndtr((e[None, :] - centres[:, None]) / math.sqrt(var))
    return np.diff(cdf, axis=1)


def cell_law(P, xedges, yedges):
    """Exact cell masses of a smoothed pair on a rectangular partition."""
    ax = _cell_probs(P.s, P.tau, xedges) * P.weights[:, None]
    ay = _cell_probs(P.t, P.tau_y, yedges)
    probs = np.clip(ax.T @ ay, 0.0, None)
    return FiniteJointLaw(np.arange(probs.shape[0]), np.arange(probs.shape[1]),
                          probs / probs.sum())


@dataclass(frozen=True)
class MixingReport:
    alpha: float
    delta4: float
    method: str
    cell_error_bound: float

    def to_dict(self):
        return asdict(self)


def alpha_smoothed_pair(P, cells=DEFAULT_CELLS, xedges=None, yedges=None,
                        with_delta4=True):
    """``alpha`` of a smoothed pair from its law on a grid of cells.

    Cells default to the marginal ``k/cells`` quantiles with unbounded outer
    cells; masses are exact normal-CDF sums.  The reported error bound is
    twice the largest cell mass.
    """
    if cells > ENUMERATION_CAP:
        raise CapacityError(f"{cells} cells per axis exceed the cap")
    if xedges is None:
        xedges = quantile_edges(P.marginal_x(), cells)
    if yedges is None:
        yedges = quantile_edges(P.marginal_y(), cells)
    if len(xedges) + 1 > ENUMERATION_CAP or len(yedges) + 1 > ENUMERATION_CAP:
        raise CapacityError("cell count per axis exceeds the cap")
    law = cell_law(P, np.asarray(xedges), np.asarray(yedges))
    alpha = alpha_exact(law)
    delta4 = delta_n_coefficient(P, 4) if with_delta4 else float("nan")
    return MixingReport(alpha, delta4, "grid-cell", 2.0 * float(law.probs.max()))


def delta_n_coefficient(P, n, grid=None):
    """``(int p_X p_Y |p / (p_X p_Y) - 1|^n)^(1/n)`` by 2-D quadrature.

    Nodes where ``p_X p_Y < 1e-300`` are skipped.  For ``n = 1`` the
    integrand has kinks on the curve ``p = p_X p_Y``, so the trapezoid error
    is larger there (about 1e-3 on the default grid) than for ``n = 2, 4``.
    """
    if not n >= 1:
        raise DomainError("n must be >= 1")
    if grid is None:
        grid = pair_grid(P)
    f = pair_fields(P, grid)
    lpx = P.marginal_x().log_density(grid.xs)
    lpy = P.marginal_y().log_density(grid.ys)
    lprod = lpx[:, None] + lpy[None, :]
    keep = lprod > math.log(1e-300)
    ratio = np.exp(np.where(keep, f.logp - lprod, 0.0))
    integrand = np.where(keep, np.exp(lprod) * np.abs(ratio - 1.0) ** n, 0.0)
    return max(grid.integrate(integrand), 0.0) ** (1.0 / n)


# bounded test functions for the covariance inequality: (callable, sup bound)
def indicator(a):
    return (lambda u: (np.asarray(u) <= a).astype(float)), 1.0


def centred_indicator(a, level=0.5):
    """``1(u <= a) - level``; sup bound ``max(level, 1 - level)``."""
    return (lambda u: (np.asarray(u) <= a) - float(level)), max(level, 1.0 - level)


def clipped_identity(c):
    return (lambda u: np.clip(u, -c, c)), float(c)


def gaussian_kernel(x, tau):
    def k(u):
        d = x - np.asarray(u, dtype=float)
        return np.exp(-d * d / (2 * tau)) / math.sqrt(2 * math.pi * tau)
    return k, 1.0 / math.sqrt(2 * math.pi * tau)


def covariance(law, xi, nu):
    fx = np.asarray(xi(law.row_states), dtype=float)
    gy = np.asarray(nu(law.col_states), dtype=float)
    return float(fx @ law.probs @ gy
                 - (law.row_marginal @ fx) * (law.col_marginal @ gy))


def covariance_bound_check(law, xi, nu):
    """Slack ``4 C1 C2 alpha - |Cov(xi(S), nu(T))|``.

    ``xi`` and ``nu`` are ``(callable, sup_bound)`` pairs; ``law`` is a
    :class:`FiniteJointLaw` or a smoothed pair (whose base law is used).
    """
    if isinstance(law, SmoothedPair):
        law = base_law(law)
    (f, c1), (g, c2) = xi, nu
    return 4 * c1 * c2 * alpha_exact(law) - abs(covariance(law, f, g))


def density_difference_bound_check(P, grid=None):
    """``max |p_{X,Y} - p_X p_Y| - 2 alpha(S,T) / (pi tau)`` over a grid."""
    if not P.equal_tau:
        raise DomainError("needs equal smoothing variances")
    alpha = alpha_exact(base_law(P))
    if grid is None:
        grid = pair_grid(P, nodes_per_sd=4.0)
    f = pair_fields(P, grid)
    px = np.exp(P.marginal_x().log_density(grid.xs))
    py = np.exp(P.marginal_y().log_density(grid.ys))
    gap = np.abs(f.p - px[:, None] * py[None, :]).max()
    return float(gap - 2 * alpha / (math.pi * P.tau))


def stability_bound(eps, C):
    """``(exp(C eps^(1/5)) - 1) + 2 eps^(1/5)``."""
    d = eps ** 0.2
    return math.expm1(C * d) + 2 * d


def fit_stability_constant(eps_values, excesses):
    """Smallest ``C >= 0`` with ``excess <= stability_bound(eps, C)`` throughout."""
    C = 0.0
    for eps, ex in zip(eps_values, excesses):
        d = eps ** 0.2
        need = ex - 2 * d
        if need > 0:
            C = max(C, math.log1p(need) / d)
    return C


def tv_window_check(X, eps, B, node_count=20001):
    """``int_{|w| <= B sqrt(tau)} |p_{X+Z}(w) - p_X(w)| dw`` for ``Z ~ N(0, eps)``."""
    if not eps > 0:
        raise DomainError("eps must be > 0")
    if not B > 1:
        raise DomainError("B must be > 1")
    half = B * math.sqrt(X.tau)
    grid = GridSpec(-half, half, node_count)
    w = grid.nodes()
    diff = np.exp(add_noise(X, eps).log_density(w)) - np.exp(X.log_density(w))
    return grid.integrate(np.abs(diff))


def tv_window_pair(P, eps, B, nodes_per_sd=16.0):
    """Joint-density analogue: ``int_{L_B} |p_{W,Y} - p_{X,Y}|`` with ``W = X + Z``."""
    half = B * math.sqrt(P.tau)
    h = min(math.sqrt(P.tau), math.sqrt(P.tau_y)) / nodes_per_sd
    grid = square_grid((-half, half), (-half, half), h)
    before = pair_fields(P, grid).p
    after = pair_fields(add_noise_pair(P, eps, 1), grid).p
    return grid.integrate(np.abs(after - before))


@dataclass(frozen=True)
class StabilityRow:
    eps: float
    alpha_before: float
    alpha_after: float
    tv_window: float
    tv_window_pair: float

    @property
    def excess(self):
        return self.alpha_after - self.alpha_before


def mixing_stability(P, eps_grid=(0.5, 0.1, 0.02), B=3.0, cells=DEFAULT_CELLS):
    """``alpha(X + Z, Y)`` against ``alpha(X, Y)`` on shared cells, per ``eps``."""
    xedges = quantile_edges(P.marginal_x(), cells)
    yedges = quantile_edges(P.marginal_y(), cells)
    a0 = alpha_smoothed_pair(P, cells, xedges, yedges, with_delta4=False).alpha
    rows = []
    for eps in eps_grid:
        W = add_noise_pair(P, eps, 1)
        a1 = alpha_smoothed_pair(W, cells, xedges, yedges, with_delta4=False).alpha
        rows.append(StabilityRow(float(eps), a0, a1,
                                 tv_window_check(P.marginal_x(), eps, B),
                                 tv_window_pair(P, eps, B)))
    return rows
