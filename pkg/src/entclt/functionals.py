"""Fisher information, relative entropy and the convolution decomposition.

All expectations are quadratures against the exact smoothed densities.  The
identities and bounds of the sub-additivity argument are exposed as
functions returning the quantities on both sides, so callers can assert on
residuals and slacks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .errors import DomainError, NumericError
from .quadrature import pair_fields, pair_grid, sum_score_on_grid
from .smoothed import (
    TAIL_BUDGET,
    GridSpec,
    SmoothedPair,
    SmoothedScalar,
    _as_finite,
    add_noise,
    standardize,
)

MAX_WIDENINGS = 8
HERMITE_NODES = 200


def _grid_for(X, grid=None):
    """Default window, widened until the exact tail mass is within budget."""
    if grid is not None:
        if X.tail_mass(grid.lower, grid.upper) > TAIL_BUDGET:
            raise NumericError("supplied grid truncates more than the tail budget")
        return grid
    sds = 10.0
    for _ in range(MAX_WIDENINGS):
        grid = X.default_grid(sds)
        if X.tail_mass(grid.lower, grid.upper) <= TAIL_BUDGET:
            return grid
        sds *= 1.5
    raise NumericError("quadrature window exceeded its growth cap")


def fisher(X, grid=None):
    """Fisher information ``J(X) = E rho(X)^2``."""
    grid = _grid_for(X, grid)
    logp, rho = X.evaluate(grid.nodes())
    return grid.integrate(np.exp(logp) * rho * rho)


def fisher_standardized(X, grid=None):
    """``J_st(X) = Var(X) J(X) - 1``; zero exactly for Gaussians."""
    return X.variance * fisher(X, grid) - 1.0


def relent_direct(X, standardize_first=True, grid=None):
    """Relative entropy ``D(f || phi)`` to the standard normal by quadrature.

    By default ``X`` is first centred and scaled to unit variance, so the
    result measures non-Gaussianity of shape only.
    """
    U = standardize(X) if standardize_first else X
    grid = _grid_for(U, grid)
    x = grid.nodes()
    logf = U.log_density(x)
    logphi = -0.5 * (x * x + math.log(2 * math.pi))
    return grid.integrate(np.exp(logf) * (logf - logphi))


@dataclass(frozen=True)
class DeBruijnResult:
    value: float
    tail_bound: float
    tail_warning: bool
    taus: np.ndarray
    integrand: np.ndarray

    def __float__(self):
        return self.value


def debruijn_integrand(U, taus):
    """``J(U + Z_s) - 1/(1 + s)`` for a unit-variance ``U`` at each ``s``."""
    out = np.empty(len(taus))
    for k, s in enumerate(taus):
        V = add_noise(U, s) if s > 0 else U
        out[k] = fisher(V) - 1.0 / (1.0 + s)
    return out


def relent_debruijn(X, tau_max=100.0, n_tau=200):
    """Relative entropy from the integrated Fisher-information defect.

    The integral over ``s in [0, tau_max]`` is taken in ``u = log(1 + s)``
    on a uniform grid (Simpson), where the integrand becomes
    ``J_st(U + Z_s) / 2``.  The remainder beyond ``tau_max`` is bounded using
    ``J_st(U + Z_s) <= Var(S) / (tau_U + s)`` and returned as ``tail_bound``.
    """
    if tau_max < 50:
        raise DomainError("tau_max must be >= 50")
    if n_tau < 8:
        raise DomainError("n_tau must be >= 8")
    U = standardize(X)
    u = np.linspace(0.0, math.log1p(tau_max), n_tau)
    taus = np.expm1(u)
    integrand = debruijn_integrand(U, taus)
    # J - 1/(1+s) = J_st/(1+s); ds = (1+s) du
    value = 0.5 * simpson(integrand * (1.0 + taus), x=u)
    tau0 = U.tau
    tail = 0.0 if tau0 >= 1.0 else 0.5 * math.log((tau_max + 1) / (tau_max + tau0))
    warn = tail > 0.1 * abs(value)
    return DeBruijnResult(float(value), tail, bool(warn), taus, integrand)


def _pair_setup(P, beta):
    if not 0.0 <= beta <= 1.0:
        raise DomainError("beta must lie in [0, 1]")
    a, b = math.sqrt(beta), math.sqrt(1.0 - beta)
    grid = pair_grid(P, a, b)
    fields = pair_fields(P, grid)
    X, Y = P.marginal_x(), P.marginal_y()
    rx = X.evaluate(grid.xs)[1]
    ry = Y.evaluate(grid.ys)[1]
    rt = sum_score_on_grid(P, grid, a, b)
    return a, b, grid, fields, rx, ry, rt


def delta_functional(P, beta):
    """``E (sqrt(b) rho_X + sqrt(1-b) rho_Y - rho~(sqrt(b) X + sqrt(1-b) Y))^2``."""
    a, b, grid, f, rx, ry, rt = _pair_setup(P, float(beta))
    h = a * rx[:, None] + b * ry[None, :] - rt
    return grid.integrate(f.p * h * h)


def m_function(P, a, b, x, y):
    """``a (rho^(1) - rho_X) + b (rho^(2) - rho_Y)``; zero for independent pairs."""
    x, y = np.broadcast_arrays(_as_finite(x), _as_finite(y, "y"))
    _, r1, r2 = P.evaluate(x, y)
    rx = P.marginal_x().evaluate(x)[1]
    ry = P.marginal_y().evaluate(y)[1]
    out = a * (r1 - rx) + b * (r2 - ry)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class DecompositionReport:
    beta: float
    j_x: float
    j_y: float
    j_sum: float
    cross_term: float
    m_term: float
    delta: float
    residual: float

    @property
    def lhs(self):
        b = self.beta
        return (b * self.j_x + (1 - b) * self.j_y - self.j_sum
                + 2 * math.sqrt(b * (1 - b)) * self.cross_term + 2 * self.m_term)


def fishdecomp_check(P, beta):
    """Both sides of the Fisher-information decomposition of a weighted sum.

    ``J(X)``, ``J(Y)`` and ``J(sum)`` come from 1-D quadrature; the cross
    term, the ``E M rho~`` term and ``Delta`` from 2-D quadrature.  The
    residual therefore measures how well the two-dimensional Stein identity
    holds under the discretisation.
    """
    beta = float(beta)
    if not 0.0 < beta < 1.0:
        raise DomainError("beta must lie in (0, 1)")
    a, b, grid, f, rx, ry, rt = _pair_setup(P, beta)
    p = f.p
    cross = grid.integrate(p * rx[:, None] * ry[None, :])
    m = a * (f.rho1 - rx[:, None]) + b * (f.rho2 - ry[None, :])
    m_term = grid.integrate(p * m * rt)
    h = a * rx[:, None] + b * ry[None, :] - rt
    delta = grid.integrate(p * h * h)
    jx = fisher(P.marginal_x())
    jy = fisher(P.marginal_y())
    js = fisher(P.sum_law(a, b))
    rep = DecompositionReport(beta, jx, jy, js, cross, m_term, delta, 0.0)
    return DecompositionReport(beta, jx, jy, js, cross, m_term, delta,
                               rep.lhs - delta)


def subadditivity_gap(P, beta):
    """``beta J(X) + (1-beta) J(Y) - J(sum) - Delta``.

    Non-negative for independent pairs; for dependent pairs the deficit is
    what the mixing correction ``C alpha^(1/3 - eps)`` has to cover.
    """
    rep = fishdecomp_check(P, beta)
    return beta * rep.j_x + (1 - beta) * rep.j_y - rep.j_sum - rep.delta


# test functions with both partial derivatives, for the 2-D Stein identity
STEIN_CATALOG = {
    "x": (lambda x, y: x, lambda x, y: np.ones_like(x), lambda x, y: np.zeros_like(x)),
    "y": (lambda x, y: y, lambda x, y: np.zeros_like(x), lambda x, y: np.ones_like(x)),
    "xy": (lambda x, y: x * y, lambda x, y: y, lambda x, y: x),
    "x2": (lambda x, y: x * x, lambda x, y: 2 * x, lambda x, y: np.zeros_like(x)),
    "sin(x+y)": (lambda x, y: np.sin(x + y), lambda x, y: np.cos(x + y),
                 lambda x, y: np.cos(x + y)),
}


def stein_residual_2d(P, which, f):
    """``E rho^(i)(X, Y) f(X, Y) + E d_i f(X, Y)``.

    ``f`` is a catalog key or a ``(f, d1f, d2f)`` triple of vectorised
    callables.
    """
    if which not in (1, 2):
        raise DomainError("which must be 1 or 2")
    if isinstance(f, str):
        try:
            f = STEIN_CATALOG[f]
        except KeyError:
            raise DomainError(f"unknown test function {f!r}") from None
    fn, d1, d2 = f
    grid = pair_grid(P)
    fields = pair_fields(P, grid)
    x, y = np.meshgrid(grid.xs, grid.ys, indexing="ij")
    rho = fields.rho1 if which == 1 else fields.rho2
    deriv = d1(x, y) if which == 1 else d2(x, y)
    p = fields.p
    return grid.integrate(p * rho * fn(x, y)) + grid.integrate(p * deriv)


def theta_seminorm_fn(f, base_tau, nodes=HERMITE_NODES):
    """Squared ``Theta`` seminorm of ``f`` against ``Z ~ N(0, base_tau/2)``.

    The infimum over affine ``a z + b`` is the residual variance after a
    linear projection, ``Var f(Z) - Cov(f(Z), Z)^2 / Var Z``.
    """
    if not base_tau > 0:
        raise DomainError("base_tau must be > 0")
    v = 0.5 * base_tau
    t, w = np.polynomial.hermite_e.hermegauss(nodes)
    w = w / w.sum()
    z = math.sqrt(v) * t
    fz = np.asarray(f(z), dtype=float)
    mean = w @ fz
    var = w @ (fz - mean) ** 2
    cov = w @ ((fz - mean) * z)
    return float(var - cov * cov / v)


def theta_seminorm(X, base_tau):
    return theta_seminorm_fn(lambda z: X.evaluate(z)[1], base_tau)


def _second_moment_K(P, K):
    ms = max(P.base_second_moments())
    if K is None:
        return ms / P.tau
    if ms > K * P.tau * (1 + 1e-12):
        raise DomainError(f"max second moment {ms:.6g} exceeds K*tau")
    return K


def deltadom_lowerbound(P, beta, K=None):
    """``(Delta, bound)`` with bound ``beta(1-beta) e^{-8K}/32 (|rho_X|^2 + |rho_Y|^2)``."""
    if not P.equal_tau:
        raise DomainError("lower bound needs equal smoothing variances")
    K = _second_moment_K(P, K)
    delta = delta_functional(P, beta)
    norms = (theta_seminorm(P.marginal_x(), P.tau)
             + theta_seminorm(P.marginal_y(), P.tau))
    bound = beta * (1 - beta) * math.exp(-8 * K) / 32 * norms
    return delta, bound


def deltadom_lowerbound_check(P, beta, K=None):
    """Slack ``Delta - bound`` of the Gaussian-domination lower bound."""
    delta, bound = deltadom_lowerbound(P, beta, K)
    return delta - bound


def c_tau_k(tau, k):
    """``sqrt(2) (2k / (tau e))^(k/2)``: sup of ``(u/tau)^k phi_tau / phi_2tau``."""
    return math.sqrt(2.0) * (2.0 * k / (tau * math.e)) ** (k / 2.0)


@dataclass(frozen=True)
class ScoreBoundReport:
    k: int
    c_tau_k: float
    max_violation: float
    moment: float
    moment_bound: float


def score_pointwise_bound_check(X, k, grid=None):
    """Sweep ``p(x)|rho(x)|^k - c_{tau,k} p_{2 tau}(x)`` over a grid."""
    if int(k) != k or k < 1:
        raise DomainError("k must be an integer >= 1")
    k = int(k)
    c = c_tau_k(X.tau, k)
    if grid is None:
        grid = X.default_grid()
    x = grid.nodes()
    logp, rho = X.evaluate(x)
    wide = add_noise(X, X.tau).log_density(x)
    # compare in a scale that does not underflow: both sides share exp(wide)
    gap = np.exp(logp - wide) * np.abs(rho) ** k - c
    violation = float(np.max(gap * np.exp(wide)))
    mom_grid = _grid_for(X)
    lp, r = X.evaluate(mom_grid.nodes())
    moment = mom_grid.integrate(np.exp(lp) * np.abs(r) ** k) ** (1.0 / k)
    mbound = math.sqrt(2.0 ** (1.0 / k) * 2.0 * k / (X.tau * math.e))
    return ScoreBoundReport(k, c, violation, float(moment), mbound)


def pair_score_pointwise_bound_check(P, k, which):
    """Bivariate version: ``p |rho^(i)|^k - sqrt(2) c_{tau,k} p_{2 tau}`` on the pair grid.

    The untouched coordinate contributes ``phi_tau / phi_2tau <= sqrt(2)``,
    so the bivariate constant is ``sqrt(2)`` times the scalar one; product
    Gaussians attain it at ``y = 0``.
    """
    if not P.equal_tau:
        raise DomainError("pointwise bound needs equal smoothing variances")
    k = int(k)
    c = math.sqrt(2.0) * c_tau_k(P.tau, k)
    grid = pair_grid(P, nodes_per_sd=4.0)
    f = pair_fields(P, grid)
    wide = pair_fields(SmoothedPair(P.atoms, P.weights, 2 * P.tau), grid).logp
    rho = f.rho1 if which == 1 else f.rho2
    gap = np.exp(f.logp - wide) * np.abs(rho) ** k - c
    return float(np.max(gap * np.exp(wide)))


def scorel2_window(X, B, K=None, node_count=4097):
    """``(integral, bound)`` for ``int_{|u| <= B sqrt(tau)} rho^2`` and
    ``8 B^3 (3 + 2K) / sqrt(tau)``."""
    if not B > 1:
        raise DomainError("B must be > 1")
    m2 = X.cloud.second_moment
    if K is None:
        K = m2 / X.tau
    elif m2 > K * X.tau * (1 + 1e-12):
        raise DomainError("cloud second moment exceeds K*tau")
    half = B * math.sqrt(X.tau)
    u = np.linspace(-half, half, node_count)
    rho = X.evaluate(u)[1]
    integral = float(simpson(rho * rho, x=u))
    bound = 8 * B ** 3 * (3 + 2 * K) / math.sqrt(X.tau)
    return integral, bound


def scorel2_window_check(X, B, K=None):
    """Slack ``bound - integral`` of the windowed L2 score bound."""
    integral, bound = scorel2_window(X, B, K)
    return bound - integral


def _window_mask(grid, half):
    return ((np.abs(grid.xs) <= half)[:, None]
            & (np.abs(grid.ys) <= half)[None, :])


def window_m_term(P, beta, B, alpha, K=None):
    """``(|E M rho~ 1_{L_B}|, alpha B^4 (a+b) 40 sqrt(2) (3+2K)/tau)``."""
    if not P.equal_tau:
        raise DomainError("needs equal smoothing variances")
    K = _second_moment_K(P, K)
    a, b, grid, f, rx, ry, rt = _pair_setup(P, float(beta))
    m = a * (f.rho1 - rx[:, None]) + b * (f.rho2 - ry[None, :])
    inside = _window_mask(grid, B * math.sqrt(P.tau))
    value = abs(grid.integrate(np.where(inside, f.p * m * rt, 0.0)))
    bound = alpha * B ** 4 * (a + b) * 40 * math.sqrt(2) * (3 + 2 * K) / P.tau
    return value, bound


def offwindow_term(P, beta, B, K=None):
    """``(|E rho^(1) rho~ 1_{not L_B}|, (2 sqrt2/(e tau)) sqrt(pq) ((K+2)/B^2)^(1/p))``
    at ``p = q = 2``."""
    if not P.equal_tau:
        raise DomainError("needs equal smoothing variances")
    K = _second_moment_K(P, K)
    a, b, grid, f, rx, ry, rt = _pair_setup(P, float(beta))
    outside = ~_window_mask(grid, B * math.sqrt(P.tau))
    value = abs(grid.integrate(np.where(outside, f.p * f.rho1 * rt, 0.0)))
    bound = 2 * math.sqrt(2) / (math.e * P.tau) * 2 * math.sqrt((K + 2) / B ** 2)
    return value, bound


def product_term(P, B, alpha):
    """``(E rho_X rho_Y, bound)`` with the explicit first-step bound

    ``2 alpha/(pi tau) (int_w |rho_X|)(int_w |rho_Y|)`` plus the off-window
    integrals of ``|rho_X rho_Y|`` under the joint and product densities.
    """
    if not P.equal_tau:
        raise DomainError("needs equal smoothing variances")
    grid = pair_grid(P)
    f = pair_fields(P, grid)
    X, Y = P.marginal_x(), P.marginal_y()
    lpx, rx = X.evaluate(grid.xs)
    lpy, ry = Y.evaluate(grid.ys)
    prod = np.abs(rx)[:, None] * np.abs(ry)[None, :]
    value = grid.integrate(f.p * rx[:, None] * ry[None, :])
    half = B * math.sqrt(P.tau)
    inside = _window_mask(grid, half)
    ix = np.abs(grid.xs) <= half
    iy = np.abs(grid.ys) <= half
    win = (grid.wx[ix] @ np.abs(rx[ix])) * (grid.wy[iy] @ np.abs(ry[iy]))
    pxy = np.exp(lpx)[:, None] * np.exp(lpy)[None, :]
    off = grid.integrate(np.where(inside, 0.0, (f.p + pxy) * prod))
    bound = 2 * alpha / (math.pi * P.tau) * win + off
    return value, bound


def fit_subadditivity_constant(gaps, alphas, eps=0.05, tolerance=1e-8):
    """Smallest ``C >= 0`` with ``gap + C alpha^(1/3 - eps) >= 0`` for all pairs.

    Pairs with ``alpha == 0`` cannot be rescued by any ``C``; if one of them
    has ``gap < -tolerance`` a :class:`NumericError` is raised.
    """
    C = 0.0
    power = 1.0 / 3.0 - eps
    for g, al in zip(gaps, alphas):
        if g >= 0:
            continue
        if al <= 0:
            if g < -tolerance:
                raise NumericError(f"independent pair has gap {g:.3g} < 0")
            continue
        C = max(C, -g / al ** power)
    return C
