"""Gaussian-smoothed finitely supported laws.

A finitely supported law ``S`` plus an independent ``N(0, tau)`` perturbation
has the exact density ``p(x) = sum_i w_i phi_tau(x - s_i)``.  Every functional
in this package is evaluated on that representation, in the log domain so the
score stays finite far out in the tails.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import ndtr

from .errors import DomainError, NumericError

LOG_2PI = math.log(2.0 * math.pi)

# matrix entries evaluated per block; bounds peak memory for large clouds
_BLOCK = 1 << 21

WINDOW_SDS = 10.0
MIN_NODES = 64
DEFAULT_MIN_NODES = 512
DEFAULT_MAX_NODES = 4096
NODES_PER_SD = 12.0
TAIL_BUDGET = 1e-10
ROUTE_TOLERANCE = 1e-6


def _as_finite(x, name="x"):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def _frozen(arr):
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


def _clean_weights(weights, n):
    w = np.asarray(weights, dtype=float).ravel()
    if w.shape != (n,):
        raise DomainError(f"expected {n} weights, got {w.shape[0]}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise DomainError("weights must be finite and non-negative")
    total = w.sum()
    if abs(total - 1.0) > 1e-9:
        raise DomainError(f"weights sum to {total!r}, not 1")
    return w / total


@dataclass(frozen=True, eq=False)
class GridSpec:
    """A 1-D quadrature grid.

    ``rule='trapezoid'`` places ``node_count`` nodes on ``[lower, upper]``
    including the endpoints; ``rule='midpoint'`` uses the centres of
    ``node_count`` equal cells.
    """

    lower: float
    upper: float
    node_count: int = DEFAULT_MAX_NODES
    rule: str = "trapezoid"

    def __post_init__(self):
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise DomainError("grid bounds must be finite")
        if not self.lower < self.upper:
            raise DomainError("grid requires lower < upper")
        if int(self.node_count) != self.node_count or self.node_count < MIN_NODES:
            raise DomainError(f"node_count must be an integer >= {MIN_NODES}")
        if self.rule not in ("trapezoid", "midpoint"):
            raise DomainError(f"unknown rule {self.rule!r}")

    @property
    def step(self):
        if self.rule == "trapezoid":
            return (self.upper - self.lower) / (self.node_count - 1)
        return (self.upper - self.lower) / self.node_count

    def nodes(self):
        if self.rule == "trapezoid":
            return np.linspace(self.lower, self.upper, self.node_count)
        h = self.step
        return self.lower + h * (np.arange(self.node_count) + 0.5)

    def weights(self):
        w = np.full(self.node_count, self.step)
        if self.rule == "trapezoid":
            w[0] *= 0.5
            w[-1] *= 0.5
        return w

    def integrate(self, values):
        return float(np.asarray(values) @ self.weights())


@dataclass(frozen=True, eq=False)
class AtomCloud:
    """Atoms and non-negative weights summing to one.

    Zero-weight atoms are dropped at construction; weights are renormalised
    after a 1e-9 sum check so the stored weights sum to one to rounding.
    """

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float).ravel()
        if atoms.size == 0:
            raise DomainError("atom cloud must be non-empty")
        atoms = _as_finite(atoms, "atoms")
        w = _clean_weights(self.weights, atoms.size)
        keep = w > 0
        object.__setattr__(self, "atoms", _frozen(atoms[keep]))
        object.__setattr__(self, "weights", _frozen(w[keep] / w[keep].sum()))

    @classmethod
    def from_samples(cls, samples):
        """Empirical law; repeated values are merged into one weighted atom."""
        samples = np.asarray(samples, dtype=float).ravel()
        if samples.size == 0:
            raise DomainError("atom cloud must be non-empty")
        vals, counts = np.unique(samples, return_counts=True)
        return cls(vals, counts / samples.size)

    @classmethod
    def point(cls, x=0.0):
        return cls([x], [1.0])

    def __len__(self):
        return self.atoms.size

    @property
    def mean(self):
        return float(self.weights @ self.atoms)

    @property
    def variance(self):
        d = self.atoms - self.mean
        return float(self.weights @ (d * d))

    @property
    def second_moment(self):
        return float(self.weights @ (self.atoms * self.atoms))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["atom", "weight"])
            for a, w in zip(self.atoms, self.weights):
                writer.writerow([f"{a:.17g}", f"{w:.17g}"])

    @classmethod
    def from_csv(cls, path):
        atoms, weights = [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if [h.strip() for h in header] != ["atom", "weight"]:
                raise DomainError(f"{path}: expected header 'atom,weight'")
            for row in reader:
                if row:
                    atoms.append(float(row[0]))
                    weights.append(float(row[1]))
        return cls(atoms, weights)


def _mixture_eval(x, atoms, logw, var):
    """log p(x) and E[x - S | X = x] for a 1-D Gaussian mixture."""
    x = np.asarray(x, dtype=float).ravel()
    logp = np.empty_like(x)
    resid = np.empty_like(x)
    rows = max(1, _BLOCK // atoms.size)
    for lo in range(0, x.size, rows):
        d = x[lo:lo + rows, None] - atoms[None, :]
        e = logw - (d * d) / (2.0 * var)
        top = e.max(axis=1, keepdims=True)
        np.exp(e - top, out=e)
        s0 = e.sum(axis=1)
        logp[lo:lo + rows] = top[:, 0] + np.log(s0)
        resid[lo:lo + rows] = np.einsum("ij,ij->i", e, d) / s0
    logp -= 0.5 * (LOG_2PI + math.log(var))
    return logp, resid


@dataclass(frozen=True, eq=False)
class SmoothedScalar:
    """The law of ``S + Z`` with ``S ~ cloud`` and ``Z ~ N(0, tau)``."""

    cloud: AtomCloud
    tau: float
    _logw: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not isinstance(self.cloud, AtomCloud):
            raise DomainError("cloud must be an AtomCloud")
        tau = float(self.tau)
        if not (math.isfinite(tau) and tau > 0):
            raise DomainError("tau must be finite and > 0")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "_logw", _frozen(np.log(self.cloud.weights)))

    @classmethod
    def gaussian(cls, tau, mean=0.0):
        return cls(AtomCloud.point(mean), tau)

    @classmethod
    def from_atoms(cls, atoms, weights, tau):
        return cls(AtomCloud(atoms, weights), tau)

    @property
    def atoms(self):
        return self.cloud.atoms

    @property
    def weights(self):
        return self.cloud.weights

    @property
    def mean(self):
        return self.cloud.mean

    @property
    def variance(self):
        return self.cloud.variance + self.tau

    def log_density(self, x):
        x = _as_finite(x)
        logp, _ = _mixture_eval(x, self.atoms, self._logw, self.tau)
        return logp.reshape(x.shape)

    def evaluate(self, x):
        """Return ``(log p(x), rho(x))`` on an array of points."""
        x = _as_finite(x)
        logp, resid = _mixture_eval(x, self.atoms, self._logw, self.tau)
        return logp.reshape(x.shape), (-resid / self.tau).reshape(x.shape)

    def default_grid(self, sds=WINDOW_SDS):
        sd = math.sqrt(self.tau)
        lo = float(self.atoms.min()) - sds * sd
        hi = float(self.atoms.max()) + sds * sd
        nodes = int(math.ceil(NODES_PER_SD * (hi - lo) / sd)) + 1
        nodes = min(DEFAULT_MAX_NODES, max(DEFAULT_MIN_NODES, nodes))
        return GridSpec(lo, hi, nodes)

    def tail_mass(self, lower, upper):
        """Exact probability of falling outside ``[lower, upper]``."""
        sd = math.sqrt(self.tau)
        below = ndtr((lower - self.atoms) / sd)
        above = ndtr((self.atoms - upper) / sd)
        return float(self.weights @ (below + above))

    def cdf(self, x):
        x = _as_finite(x)
        sd = math.sqrt(self.tau)
        return (ndtr((x[..., None] - self.atoms) / sd) @ self.weights)


def density(X, x):
    """Density of ``X`` at ``x``; scalar in, float out."""
    out = np.exp(X.log_density(x))
    return float(out) if out.ndim == 0 else out


def score(X, x):
    """Score ``p'(x)/p(x)`` with ``p'(x) = -E[(x - S)/tau * phi_tau(x - S)]``."""
    out = X.evaluate(x)[1]
    return float(out) if out.ndim == 0 else out


def density_derivative(X, x):
    logp, rho = X.evaluate(x)
    out = np.exp(logp) * rho
    return float(out) if out.ndim == 0 else out


def add_noise(X, eps):
    """Convolve with ``N(0, eps)``; exact on this representation."""
    eps = float(eps)
    if not (math.isfinite(eps) and eps > 0):
        raise DomainError("eps must be > 0")
    return SmoothedScalar(X.cloud, X.tau + eps)


def rescale(X, c):
    """The law of ``c X``: atoms scale by ``c``, ``tau`` by ``c**2``."""
    c = float(c)
    if c == 0 or not math.isfinite(c):
        raise DomainError("scale factor must be finite and non-zero")
    return SmoothedScalar(AtomCloud(c * X.atoms, X.weights), c * c * X.tau)


def standardize(X):
    """Centre and scale ``X`` to mean zero, unit variance."""
    sd = math.sqrt(X.variance)
    cloud = AtomCloud((X.atoms - X.mean) / sd, X.weights)
    return SmoothedScalar(cloud, X.tau / X.variance)


def _pair_eval(x, y, atoms, logw, tx, ty):
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    logp = np.empty_like(x)
    rx = np.empty_like(x)
    ry = np.empty_like(x)
    s, t = atoms[:, 0], atoms[:, 1]
    rows = max(1, _BLOCK // s.size)
    for lo in range(0, x.size, rows):
        dx = x[lo:lo + rows, None] - s[None, :]
        dy = y[lo:lo + rows, None] - t[None, :]
        e = logw - dx * dx / (2.0 * tx) - dy * dy / (2.0 * ty)
        top = e.max(axis=1, keepdims=True)
        np.exp(e - top, out=e)
        s0 = e.sum(axis=1)
        logp[lo:lo + rows] = top[:, 0] + np.log(s0)
        rx[lo:lo + rows] = np.einsum("ij,ij->i", e, dx) / s0
        ry[lo:lo + rows] = np.einsum("ij,ij->i", e, dy) / s0
    logp -= LOG_2PI + 0.5 * math.log(tx * ty)
    return logp, rx, ry


@dataclass(frozen=True, eq=False)
class SmoothedPair:
    """The law of ``(S + Z_S, T + Z_T)`` for a finitely supported ``(S, T)``.

    ``tau`` is the smoothing variance of both coordinates.  ``tau_y`` overrides
    the second coordinate; it only arises when extra noise is added to one
    side (see :func:`add_noise_pair`).
    """

    atoms: np.ndarray
    weights: np.ndarray
    tau: float
    tau_y: float | None = None
    _logw: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        atoms = _as_finite(np.asarray(self.atoms, dtype=float), "atoms")
        if atoms.ndim != 2 or atoms.shape[1] != 2 or atoms.shape[0] == 0:
            raise DomainError("pair atoms must have shape (n, 2) with n >= 1")
        w = _clean_weights(self.weights, atoms.shape[0])
        keep = w > 0
        tau = float(self.tau)
        tau_y = tau if self.tau_y is None else float(self.tau_y)
        for v in (tau, tau_y):
            if not (math.isfinite(v) and v > 0):
                raise DomainError("smoothing variances must be finite and > 0")
        w = w[keep] / w[keep].sum()
        object.__setattr__(self, "atoms", _frozen(atoms[keep]))
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "tau_y", tau_y)
        object.__setattr__(self, "_logw", _frozen(np.log(w)))

    @classmethod
    def product(cls, X, Y):
        """Independent coupling of two smoothed scalars with equal ``tau``."""
        if X.tau != Y.tau:
            raise DomainError("product pair needs equal smoothing variances")
        s = np.repeat(X.atoms, Y.atoms.size)
        t = np.tile(Y.atoms, X.atoms.size)
        w = np.outer(X.weights, Y.weights).ravel()
        return cls(np.column_stack([s, t]), w, X.tau)

    @classmethod
    def from_samples(cls, s, t, tau):
        s = np.asarray(s, dtype=float).ravel()
        t = np.asarray(t, dtype=float).ravel()
        if s.size != t.size or s.size == 0:
            raise DomainError("need equally many s and t samples")
        pts, counts = np.unique(np.column_stack([s, t]), axis=0, return_counts=True)
        return cls(pts, counts / s.size, tau)

    @property
    def tau_x(self):
        return self.tau

    @property
    def equal_tau(self):
        return self.tau == self.tau_y

    @property
    def s(self):
        return self.atoms[:, 0]

    @property
    def t(self):
        return self.atoms[:, 1]

    def marginal_x(self):
        return SmoothedScalar(AtomCloud(self.s, self.weights), self.tau)

    def marginal_y(self):
        return SmoothedScalar(AtomCloud(self.t, self.weights), self.tau_y)

    def swapped(self):
        return SmoothedPair(self.atoms[:, ::-1], self.weights, self.tau_y,
                            self.tau)

    def base_variances(self):
        """``(Var S, Var T)`` of the unsmoothed pair."""
        m = self.weights @ self.atoms
        d = self.atoms - m
        v = self.weights @ (d * d)
        return float(v[0]), float(v[1])

    def base_second_moments(self):
        v = self.weights @ (self.atoms * self.atoms)
        return float(v[0]), float(v[1])

    def evaluate(self, x, y):
        """Return ``(log p, rho^(1), rho^(2))`` at broadcast points."""
        x, y = np.broadcast_arrays(_as_finite(x), _as_finite(y, "y"))
        logp, rx, ry = _pair_eval(x, y, self.atoms, self._logw, self.tau,
                                  self.tau_y)
        shape = x.shape
        return (logp.reshape(shape), (-rx / self.tau).reshape(shape),
                (-ry / self.tau_y).reshape(shape))

    def sum_law(self, a, b):
        """Exact law of ``a X + b Y`` as a smoothed scalar."""
        atoms = a * self.s + b * self.t
        return SmoothedScalar(AtomCloud(atoms, self.weights),
                              a * a * self.tau + b * b * self.tau_y)


def pair_density(P, x, y):
    out = np.exp(P.evaluate(x, y)[0])
    return float(out) if out.ndim == 0 else out


def pair_partial_score(P, which, x, y):
    """Partial score ``p^(i)(x, y) / p(x, y)`` in coordinate ``which``."""
    if which not in (1, 2):
        raise DomainError("which must be 1 or 2")
    out = P.evaluate(x, y)[which]
    return float(out) if out.ndim == 0 else out


def add_noise_pair(P, eps, which=1):
    """Add independent ``N(0, eps)`` noise to one coordinate of a pair."""
    eps = float(eps)
    if not (math.isfinite(eps) and eps > 0):
        raise DomainError("eps must be > 0")
    if which == 1:
        return SmoothedPair(P.atoms, P.weights, P.tau + eps, P.tau_y)
    if which == 2:
        return SmoothedPair(P.atoms, P.weights, P.tau, P.tau_y + eps)
    raise DomainError("which must be 1 or 2")


def projection_sum_score(P, a, b, z, node_count=4097, sds=12.0):
    """Score of ``a X + b Y`` as a conditional expectation of a partial score.

    Integrates ``rho^(1)`` (or ``rho^(2)`` when ``|b| > |a|``) against the joint
    density along the line ``a x + b y = z``.  Independent of the exact
    mixture route in :func:`sum_score`; used to cross-check it.
    """
    a, b = float(a), float(b)
    if a == 0 and b == 0:
        raise DomainError("a and b cannot both be zero")
    z = np.atleast_1d(_as_finite(z, "z")).astype(float)
    flip = abs(b) > abs(a)
    Q = P.swapped() if flip else P
    a_, b_ = (b, a) if flip else (a, b)
    # integrate over the second coordinate v with u = (z - b_ v)/a_
    tu, tv = Q.tau, Q.tau_y
    var_z = a_ * a_ * tu + b_ * b_ * tv
    csd = math.sqrt(tv * a_ * a_ * tu / var_z)
    mu = a_ * Q.s + b_ * Q.t
    out = np.empty_like(z)
    for k, zk in enumerate(z):
        cm = Q.t + b_ * tv * (zk - mu) / var_z
        v = np.linspace(cm.min() - sds * csd, cm.max() + sds * csd, node_count)
        u = (zk - b_ * v) / a_
        logp, r1, _ = Q.evaluate(u, v)
        wts = np.exp(logp - logp.max())
        wts[0] *= 0.5
        wts[-1] *= 0.5
        out[k] = (wts @ r1) / wts.sum() / a_
    return out


def sum_score(P, a, b, z, check=False):
    """Score of ``a X + b Y`` at ``z``.

    The exact route uses the Gaussian-mixture law of ``a X + b Y``.  With
    ``check=True`` the projection route is also evaluated and a disagreement
    above 1e-6 raises :class:`NumericError`.
    """
    a, b = float(a), float(b)
    if a == 0 and b == 0:
        raise DomainError("a and b cannot both be zero")
    zarr = _as_finite(z, "z")
    out = P.sum_law(a, b).evaluate(zarr)[1]
    if check:
        other = projection_sum_score(P, a, b, zarr.ravel()).reshape(zarr.shape)
        gap = float(np.max(np.abs(other - out)))
        if gap > ROUTE_TOLERANCE:
            raise NumericError(f"sum-score routes disagree by {gap:.3g}")
    return float(out) if out.ndim == 0 else out
