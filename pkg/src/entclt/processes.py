"""Stationary weakly dependent sequences with known dependence structure.

Four kinds are provided:

``iid``         X_i = Y_i
``ma_m``        X_i = sum_j theta_j Y_{i-j}
``difference``  X_i = Y_i - Y_{i+1}  (long-run variance zero)
``markov_fn``   X_i = f(M_i) - E f(M) for a stationary finite Markov chain M

Innovations ``Y`` are unit-variance: standard normal, uniform on
``[-sqrt 3, sqrt 3]`` or a fair ``+-1`` coin.

Simulation draws replicas in fixed-size blocks, each from its own stream
derived from ``(seed, key, block)``, so results depend only on the seed and
the request, never on evaluation order.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, DomainError
from .mixing import FiniteJointLaw, alpha_exact
from .smoothed import AtomCloud, SmoothedPair, SmoothedScalar

KINDS = ("iid", "ma_m", "difference", "markov_fn")
INNOVATIONS = ("gaussian", "uniform", "two_point")
REPLICA_BLOCK = 4096
MIN_WINDOW_COUNT = 1000
MIN_ATOM_COUNT = 5000


@dataclass(frozen=True)
class ProcessSpec:
    kind: str
    innovation: str = "gaussian"
    theta: tuple = (1.0,)
    flip_prob: float = 0.25
    transition: tuple | None = None
    states: tuple = (-1.0, 1.0)
    seed: int = 0
    _chain: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown process kind {self.kind!r}")
        if self.innovation not in INNOVATIONS:
            raise DomainError(f"unknown innovation law {self.innovation!r}")
        theta = tuple(float(v) for v in self.theta)
        if not theta or not all(math.isfinite(v) for v in theta):
            raise DomainError("theta must be a non-empty list of finite reals")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "states", tuple(float(v) for v in self.states))
        object.__setattr__(self, "seed", int(self.seed))
        chain = None
        if self.kind == "markov_fn":
            chain = self._build_chain()
        object.__setattr__(self, "_chain", chain)

    def _build_chain(self):
        if self.transition is None:
            p = float(self.flip_prob)
            if not 0 < p < 1:
                raise DomainError("flip_prob must lie in (0, 1)")
            P = np.array([[1 - p, p], [p, 1 - p]])
        else:
            P = np.array(self.transition, dtype=float)
        k = P.shape[0]
        if P.shape != (k, k) or len(self.states) != k:
            raise DomainError("transition must be square and match states")
        if np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0, atol=1e-12):
            raise DomainError("transition rows must be probability vectors")
        vals, vecs = np.linalg.eig(P.T)
        one = np.isclose(vals, 1.0, atol=1e-10)
        if one.sum() != 1:
            raise DomainError("chain must have a unique stationary distribution")
        pi = np.real(vecs[:, one][:, 0])
        pi = pi / pi.sum()
        if np.any(pi <= 0):
            raise DomainError("stationary distribution must be positive")
        f = np.array(self.states)
        P.setflags(write=False)
        return P, pi, f - pi @ f

    @property
    def order(self):
        """Dependence range: MA order, 1 for differences, 0 for iid."""
        if self.kind == "ma_m":
            return len(self.theta) - 1
        if self.kind == "difference":
            return 1
        if self.kind == "iid":
            return 0
        return None

    @property
    def chain(self):
        if self._chain is None:
            raise DomainError(f"{self.kind} process has no chain representation")
        return self._chain

    def with_seed(self, seed):
        return ProcessSpec(self.kind, self.innovation, self.theta,
                           self.flip_prob, self.transition, self.states, seed)


def rng_for(spec, *key):
    return np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=key))


def _innovations(rng, law, shape):
    if law == "gaussian":
        return rng.standard_normal(shape)
    if law == "uniform":
        r3 = math.sqrt(3.0)
        return rng.uniform(-r3, r3, shape)
    return rng.integers(0, 2, shape) * 2.0 - 1.0


def _simulate_block(spec, length, count, rng):
    """``count`` independent stationary paths of ``X_1..X_length``."""
    if spec.kind == "iid":
        return _innovations(rng, spec.innovation, (count, length))
    if spec.kind == "difference":
        y = _innovations(rng, spec.innovation, (count, length + 1))
        return y[:, :-1] - y[:, 1:]
    if spec.kind == "ma_m":
        m = len(spec.theta) - 1
        y = _innovations(rng, spec.innovation, (count, length + m))
        x = np.zeros((count, length))
        for j, th in enumerate(spec.theta):
            x += th * y[:, m - j:m - j + length]
        return x
    P, pi, f = spec.chain
    cum = np.cumsum(P, axis=1)[:, :-1]
    state = np.searchsorted(np.cumsum(pi)[:-1], rng.random(count), side="right")
    path = np.empty((count, length), dtype=np.int64)
    for i in range(length):
        path[:, i] = state
        u = rng.random(count)
        state = (u[:, None] >= cum[state]).sum(axis=1)
    return f[path]


def simulate_paths(spec, length, count, *key):
    """Stationary paths in replica blocks with per-block derived streams."""
    out = []
    for b, lo in enumerate(range(0, count, REPLICA_BLOCK)):
        rng = rng_for(spec, *key, b)
        out.append(_simulate_block(spec, length, min(REPLICA_BLOCK, count - lo), rng))
    return np.concatenate(out, axis=0)


def autocovariance(spec, j):
    """``Cov(X_0, X_j)``."""
    j = abs(int(j))
    if spec.kind == "iid":
        return 1.0 if j == 0 else 0.0
    if spec.kind == "difference":
        return {0: 2.0, 1: -1.0}.get(j, 0.0)
    if spec.kind == "ma_m":
        th = spec.theta
        return float(sum(th[k] * th[k + j] for k in range(len(th) - j)))
    P, pi, f = spec.chain
    return float(pi @ (f * (np.linalg.matrix_power(P, j) @ f)))


def window_variance(spec, n):
    """``v_n = Var(X_1 + ... + X_n)`` from the autocovariances."""
    if spec.kind == "markov_fn":
        P, pi, f = spec.chain
        total, g = 0.0, f.copy()
        for j in range(n):
            c = float(pi @ (f * g))
            total += (n if j == 0 else 2 * (n - j)) * c
            g = P @ g
        return total
    return float(sum((n if j == 0 else 2 * (n - j)) * autocovariance(spec, j)
                     for j in range(min(n, (spec.order or 0) + 1))))


def long_run_variance(spec):
    """``v = sum_j Cov(X_0, X_j)`` over all integer lags."""
    if spec.kind == "iid":
        return 1.0
    if spec.kind == "difference":
        return 0.0
    if spec.kind == "ma_m":
        return float(sum(spec.theta)) ** 2
    P, pi, f = spec.chain
    k = P.shape[0]
    # fundamental matrix: sum_{j>=1} P^j f = (Z - I) f for centred f
    Z = np.linalg.inv(np.eye(k) - P + np.outer(np.ones(k), pi))
    return float(pi @ (f * f) + 2 * pi @ (f * ((Z - np.eye(k)) @ f)))


@dataclass(frozen=True, eq=False)
class WindowSample:
    n: int
    sums: np.ndarray
    v_n: float

    @property
    def v_n_empirical(self):
        return float(np.var(self.sums))

    @property
    def normalized(self):
        return self.sums / math.sqrt(self.n)


def simulate_windows(spec, n, count):
    """``count`` independent realisations of ``X_1 + ... + X_n``."""
    if n < 1:
        raise DomainError("n must be >= 1")
    if count < MIN_WINDOW_COUNT:
        raise CapacityError(f"count must be >= {MIN_WINDOW_COUNT}")
    paths = simulate_paths(spec, n, count, 0, n)
    return WindowSample(n, paths.sum(axis=1), window_variance(spec, n))


def markov_joint_law(spec, t):
    """Exact law of the chain pair ``(M_0, M_t)`` with centred state values."""
    P, pi, f = spec.chain
    joint = pi[:, None] * np.linalg.matrix_power(P, t)
    return FiniteJointLaw(f, f, joint)


def exact_alpha_lag(spec, t):
    """Exact ``alpha`` at lag ``t >= 1`` where one is available, else ``None``."""
    if t < 1:
        raise DomainError("lag must be >= 1")
    if spec.kind == "markov_fn":
        return alpha_exact(markov_joint_law(spec, t))
    if t > spec.order:
        return 0.0
    return None


def build_smoothed_vn(spec, n, tau, count):
    """``U_n + Z`` with Monte Carlo atoms for ``U_n`` and exact smoothing ``tau``."""
    if count < MIN_ATOM_COUNT:
        raise CapacityError(f"count must be >= {MIN_ATOM_COUNT}")
    w = simulate_windows(spec, n, count)
    return SmoothedScalar(AtomCloud.from_samples(w.normalized), tau)


def simulate_block_sums(spec, m, n, gap, count):
    """Normalised sums over ``[1, m]`` and ``[m + gap + 1, m + gap + n]``."""
    if gap < 0:
        raise DomainError("gap must be >= 0")
    paths = simulate_paths(spec, m + gap + n, count, 1, m, n, gap)
    s = paths[:, :m].sum(axis=1) / math.sqrt(m)
    t = paths[:, m + gap:].sum(axis=1) / math.sqrt(n)
    return s, t


def build_block_pair(spec, m, n, gap, tau, count):
    if count < MIN_ATOM_COUNT:
        raise CapacityError(f"count must be >= {MIN_ATOM_COUNT}")
    s, t = simulate_block_sums(spec, m, n, gap, count)
    return SmoothedPair.from_samples(s, t, tau)


def _chain_of(spec):
    if spec.kind == "markov_fn":
        return spec.chain
    if spec.kind == "iid" and spec.innovation == "two_point":
        return np.full((2, 2), 0.5), np.array([0.5, 0.5]), np.array([-1.0, 1.0])
    raise DomainError("exact block laws need a finite-state chain")


def _block_dp(P, f, start, length):
    """Distribution of ``(sum of f over length states, last state)``.

    ``start`` is the law of the first state.  Sums are tracked as visit
    counts so equal totals merge exactly.
    """
    k = P.shape[0]
    dist = {}
    for s in range(k):
        if start[s] > 0:
            c = [0] * k
            c[s] = 1
            dist[(tuple(c), s)] = start[s]
    for _ in range(length - 1):
        nxt = defaultdict(float)
        for (c, s), p in dist.items():
            for r in range(k):
                if P[s, r] > 0:
                    c2 = list(c)
                    c2[r] += 1
                    nxt[(tuple(c2), r)] += p * P[s, r]
        dist = nxt
    out = defaultdict(float)
    for (c, s), p in dist.items():
        out[(float(np.dot(c, f)), s)] += p
    return out




def exact_window_law(spec, n):
    """Exact law of ``U_n`` for a finite-state chain (or fair-coin iid)."""
    P, pi, f = _chain_of(spec)
    dist = _block_dp(P, f, pi, n)
    acc = defaultdict(float)
    for (v, _), p in dist.items():
        acc[round(v, 12)] += p
    vals = np.array(sorted(acc))
    return AtomCloud(vals / math.sqrt(n), [acc[v] for v in vals])


def exact_block_law(spec, m, n, gap):
    """Exact joint law of the normalised block sums behind ``build_block_pair``."""
    if gap < 0:
        raise DomainError("gap must be >= 0")
    P, pi, f = _chain_of(spec)
    k = P.shape[0]
    first = _block_dp(P, f, pi, m)
    hop = np.linalg.matrix_power(P, gap + 1)
    seconds = [_block_dp(P, f, np.eye(k)[s], n) for s in range(k)]
    joint = defaultdict(float)
    for (a, e), pa in first.items():
        for s2 in range(k):
            q = pa * hop[e, s2]
            if q == 0:
                continue
            for (b, _), pb in seconds[s2].items():
                joint[(round(a, 12), round(b, 12))] += q * pb
    rows = sorted({a for a, _ in joint})
    cols = sorted({b for _, b in joint})
    ri = {a: i for i, a in enumerate(rows)}
    ci = {b: j for j, b in enumerate(cols)}
    probs = np.zeros((len(rows), len(cols)))
    for (a, b), p in joint.items():
        probs[ri[a], ci[b]] += p
    return FiniteJointLaw(np.array(rows) / math.sqrt(m),
                          np.array(cols) / math.sqrt(n), probs)


def exact_block_pair(spec, m, n, gap, tau):
    """``(SmoothedPair, FiniteJointLaw)`` for exact block sums plus smoothing."""
    law = exact_block_law(spec, m, n, gap)
    return law.to_smoothed_pair(tau), law


def fit_tail_class(sums, R_values, delta=1.0):
    """Fit ``psi(R) = c / R^delta`` to ``E X^2 1(|X| >= R sqrt v) / v``.

    Returns the smallest ``c`` for which the tail-class inequality holds at
    every ``R`` in ``R_values``.
    """
    x = np.asarray(sums, dtype=float)
    x = x - x.mean()
    v = float(np.mean(x * x))
    if v == 0:
        return 0.0
    c = 0.0
    for R in R_values:
        tail = float(np.mean(x * x * (np.abs(x) >= R * math.sqrt(v)))) / v
        c = max(c, tail * R ** delta)
    return c
