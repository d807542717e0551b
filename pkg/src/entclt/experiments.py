"""Convergence runs and the inequality-verification suite.

Both drivers are deterministic functions of the configuration: every random
draw comes from a stream keyed on the process seed and the row parameters,
and rows are assembled in schedule order.
"""

from __future__ import annotations

import math

import numpy as np

from . import functionals as fn
from . import mixing as mx
from .config import ExperimentConfig
from .errors import CapacityError, DomainError, NumericError
from .processes import (ProcessSpec, build_smoothed_vn,
                        exact_block_pair, exact_window_law, markov_joint_law,
                        simulate_block_sums)
from .reports import (ConvergenceReport, ConvergenceRow, InequalityReport,
                      digest, pair_digest, scalar_digest)
from .smoothed import (SmoothedPair, SmoothedScalar, add_noise,
                       sum_score, projection_sum_score)

ROW_ERRORS = (NumericError, DomainError, CapacityError, FloatingPointError)


# ---------------------------------------------------------------- convergence

def _convergence_row(config, n):
    spec, tau, count = config.process, config.tau, config.mc_count
    X = build_smoothed_vn(spec, n, tau, count)
    gap = math.ceil(math.sqrt(n))
    s, t = simulate_block_sums(spec, n, n, gap, count)
    return ConvergenceRow(
        n=n,
        vn_over_n=X.cloud.variance,
        jst=fn.fisher_standardized(X),
        relent=fn.relent_direct(X),
        alpha_gap=mx.alpha_estimate_rectangles(s, t),
    ), X


def _is_power_of_2(n):
    return n >= 1 and n & (n - 1) == 0


def run_convergence(config: ExperimentConfig, debruijn=True):
    """One row per ``n``: ``v_n/n``, ``J_st``, ``D`` and a gap-``ceil(sqrt n)`` alpha.

    ``vn_over_n`` is the variance of the simulated ``U_n`` atoms; the analytic
    value is kept in ``meta``.  When ``debruijn`` is set the last successful
    row is also evaluated through the de Bruijn integral, which feeds the
    ``debruijn_consistent`` flag.  A row that raises a numeric, domain or
    capacity error is recorded with NaN values and its message.
    """
    from .processes import window_variance

    tol = config.tolerances
    rows = []
    last = None
    decay = None
    for n in config.n_schedule:
        try:
            row, X = _convergence_row(config, n)
            last = (len(rows), X)
        except ROW_ERRORS as exc:
            nan = float("nan")
            row = ConvergenceRow(n, nan, nan, nan, nan, error=f"{type(exc).__name__}: {exc}")
        rows.append(row)

    if debruijn and last is not None:
        i, X = last
        r = rows[i]
        db = fn.relent_debruijn(X)
        rows[i] = ConvergenceRow(r.n, r.vn_over_n, r.jst, r.relent, r.alpha_gap,
                                 float(db), r.error)
        # J_st(U + Z_s) along the smoothing grid; decay is evidence, not proof
        jst_s = db.integrand * (1.0 + db.taus)
        decay = bool(np.all(np.diff(jst_s) <= tol["quadrature"]))

    ok = [r for r in rows if not r.failed]
    budget = config.noise_budget
    pow2 = [r.jst for r in ok if _is_power_of_2(r.n)]
    summary = {
        "failed_rows": len(rows) - len(ok),
        "jst_decreasing_on_powers_of_2": all(b <= a + budget for a, b in zip(pow2, pow2[1:])),
        "jst_final_below_threshold": bool(ok) and ok[-1].jst < tol["jst_threshold"],
        "jst_nonnegative": all(r.jst >= -tol["mc"] for r in ok),
        "relent_nonnegative": all(r.relent >= -tol["mc"] for r in ok),
    }
    checked = [r for r in ok if math.isfinite(r.relent_debruijn)]
    # None when the cross-check was not run
    summary["debruijn_consistent"] = all(
        abs(r.relent - r.relent_debruijn) < tol["debruijn"] for r in checked
    ) if checked else None
    summary["debruijn_integrand_decays"] = decay
    analytic = {}
    for r in rows:
        try:
            analytic[str(r.n)] = window_variance(config.process, r.n) / r.n
        except DomainError:
            analytic[str(r.n)] = float("nan")
    if config.process.kind == "difference":
        # long-run variance zero: J_st(V_n) <= (v_n / n) / tau
        summary["jst_within_vn_bound"] = all(
            r.jst <= analytic[str(r.n)] / config.tau + tol["gaussian"] for r in ok)
    meta = dict(config.as_dict(), vn_over_n_analytic=analytic)
    return ConvergenceReport(rows, summary, meta)


def convergence_passed(report):
    flags = {k: v for k, v in report.summary.items() if isinstance(v, bool)}
    return all(flags.values()) and report.summary.get("failed_rows", 0) == 0


# ---------------------------------------------------------------- suite corpus

def scalar_corpus(config):
    """Six smoothed laws covering Gaussian, lattice, skewed and sampled shapes."""
    tau = config.tau
    chain = ProcessSpec("markov_fn", flip_prob=0.25, seed=config.process.seed)
    mc = build_smoothed_vn(config.process, 16, tau, 5000)
    return {
        "gaussian": SmoothedScalar.gaussian(1.0),
        "two_point": SmoothedScalar.from_atoms([-1.0, 1.0], [0.5, 0.5], tau),
        "skewed": SmoothedScalar.from_atoms([-1.0, 0.5, 2.0], [0.4, 0.5, 0.1], tau),
        "uniform8": SmoothedScalar.from_atoms(np.linspace(-1.5, 1.5, 8),
                                              np.full(8, 0.125), tau),
        "markov_window8": SmoothedScalar(exact_window_law(chain, 8), tau),
        "simulated_window16": mc,
    }


def analytic_pairs(tau):
    """The four basic pair shapes: independent (two kinds), co- and counter-monotone."""
    g = SmoothedScalar.gaussian(tau)
    two = SmoothedScalar.from_atoms([-1.0, 1.0], [0.5, 0.5], tau)
    skew = SmoothedScalar.from_atoms([-1.0, 0.5, 2.0], [0.4, 0.5, 0.1], tau)
    return {
        "independent_gaussian": SmoothedPair.product(g, g),
        "independent_discrete": SmoothedPair.product(two, skew),
        "comonotone": SmoothedPair([[-1, -1], [1, 1]], [0.5, 0.5], tau),
        "countermonotone": SmoothedPair([[-1, 1], [1, -1]], [0.5, 0.5], tau),
    }


def block_corpus(config):
    """Exact block-sum pairs for a persistent and an alternating two-state chain.

    Returns ``{(flip_prob, gap): (pair, law)}``.
    """
    m = config.suite.block_size
    out = {}
    for p in (0.25, 0.75):
        spec = ProcessSpec("markov_fn", flip_prob=p)
        for gap in config.suite.gaps:
            out[(p, gap)] = exact_block_pair(spec, m, m, gap, config.tau)
    return out


# ---------------------------------------------------------------- the suite

# check name -> the library operations it exercises
SUITE_MANIFEST = {
    "cramer_rao": ("fisher",),
    "jst_nonnegative": ("fisher_standardized",),
    "fisher_noise_monotone": ("fisher", "add_noise"),
    "relent_nonnegative": ("relent_direct",),
    "debruijn_consistency": ("relent_debruijn", "relent_direct"),
    "debruijn_integrand_nonnegative": ("relent_debruijn",),
    "delta_nonnegative": ("delta_functional",),
    "delta_symmetry": ("delta_functional",),
    "m_function_independent": ("m_function",),
    "sum_score_routes": ("sum_score",),
    "fishdecomp_identity": ("fishdecomp_check",),
    "stein_identity": ("stein_residual_2d",),
    "theta_nonnegative": ("theta_seminorm",),
    "theta_gaussian_zero": ("theta_seminorm",),
    "delta_lower_bound": ("deltadom_lowerbound_check", "theta_seminorm"),
    "score_pointwise_bound": ("score_pointwise_bound_check",),
    "score_moment_bound": ("score_pointwise_bound_check",),
    "pair_score_pointwise_bound": ("score_pointwise_bound_check",),
    "score_window_l2_bound": ("scorel2_window_check",),
    "window_m_term_bound": ("m_function", "alpha_exact"),
    "offwindow_term_bound": ("fishdecomp_check",),
    "product_term_bound": ("alpha_exact",),
    "alpha_exact_independent": ("alpha_exact",),
    "alpha_exact_coin": ("alpha_exact",),
    "alpha_exact_markov": ("alpha_exact",),
    "alpha_rectangles_below_exact": ("alpha_estimate_rectangles", "alpha_exact"),
    "alpha_smoothed_independent": ("alpha_smoothed_pair",),
    "alpha_delta4_ordering": ("alpha_smoothed_pair", "delta_n_coefficient"),
    "delta_n_independent": ("delta_n_coefficient",),
    "covariance_bound": ("covariance_bound_check",),
    "density_difference_bound": ("covariance_bound_check",),
    "subadditivity_fitted": ("fishdecomp_check", "alpha_exact"),
    "subadditivity_constant": ("fishdecomp_check", "alpha_exact"),
    "correction_decay": ("alpha_exact",),
    "mixing_stability": ("alpha_smoothed_pair", "tv_window_check"),
    "tv_window_bound": ("tv_window_check",),
    "tv_window_monotone": ("tv_window_check",),
    "stability_constant": ("alpha_smoothed_pair",),
}

SUM_SCORE_POINTS = np.linspace(-3.0, 3.0, 13)


class _Suite:
    def __init__(self, config):
        self.config = config
        self.tol = config.tolerances
        self.reports = []

    def upper(self, name, dig, value, bound, tol, label=""):
        self.reports.append(InequalityReport.upper(name, dig, value, bound, tol, label))

    def lower(self, name, dig, value, bound, tol, label=""):
        self.reports.append(InequalityReport.lower(name, dig, value, bound, tol, label))

    def zero(self, name, dig, value, tol, label=""):
        self.upper(name, dig, abs(value), 0.0, tol, label)


def _scalar_checks(S, scalars):
    q = S.tol["quadrature"]
    for label, X in scalars.items():
        d = scalar_digest(X)
        J = fn.fisher(X)
        S.lower("cramer_rao", d, J, 1.0 / X.variance, q, label)
        S.lower("jst_nonnegative", d, fn.fisher_standardized(X), 0.0, q, label)
        S.upper("fisher_noise_monotone", d, fn.fisher(add_noise(X, X.tau)), J, q, label)
        direct = fn.relent_direct(X)
        S.lower("relent_nonnegative", d, direct, 0.0, q, label)
        db = fn.relent_debruijn(X)
        S.zero("debruijn_consistency", d, direct - db.value, S.tol["debruijn"], label)
        S.lower("debruijn_integrand_nonnegative", d, float(np.min(db.integrand)), 0.0,
                1e-8, label)
        S.lower("theta_nonnegative", d, fn.theta_seminorm(X, X.tau), 0.0, 1e-10, label)
        for k in (1, 2, 4):
            rep = fn.score_pointwise_bound_check(X, k)
            S.upper("score_pointwise_bound", d, rep.max_violation, 0.0,
                    S.tol["pointwise"], f"{label} k={k}")
            S.upper("score_moment_bound", d, rep.moment, rep.moment_bound, q,
                    f"{label} k={k}")
        for B in S.config.suite.windows:
            integral, bound = fn.scorel2_window(X, B)
            S.upper("score_window_l2_bound", d, integral, bound, q, f"{label} B={B:g}")
    g = SmoothedScalar.gaussian(S.config.tau)
    S.zero("theta_gaussian_zero", scalar_digest(g), fn.theta_seminorm(g, g.tau), 1e-9,
           "gaussian")


def _pair_checks(S, pairs, betas):
    q, ident = S.tol["quadrature"], S.tol["identity"]
    for label, P in pairs.items():
        d = pair_digest(P)
        for beta in betas:
            tag = f"{label} beta={beta:g}"
            rep = fn.fishdecomp_check(P, beta)
            S.zero("fishdecomp_identity", d, rep.residual, ident, tag)
            S.lower("delta_nonnegative", d, rep.delta, 0.0, q, tag)
            swapped = fn.delta_functional(P.swapped(), 1.0 - beta)
            S.zero("delta_symmetry", d, rep.delta - swapped, ident, tag)
            slack = fn.deltadom_lowerbound_check(P, beta)
            S.lower("delta_lower_bound", d, slack, 0.0, 1e-8, tag)
        for which in (1, 2):
            for fname in fn.STEIN_CATALOG:
                S.zero("stein_identity", d, fn.stein_residual_2d(P, which, fname), ident,
                       f"{label} d{which} f={fname}")
            for k in (1, 2, 4):
                S.upper("pair_score_pointwise_bound", d,
                        fn.pair_score_pointwise_bound_check(P, k, which), 0.0,
                        S.tol["pointwise"], f"{label} d{which} k={k}")
        a = b = math.sqrt(0.5)
        mz = P.sum_law(a, b)
        z = mz.mean + math.sqrt(mz.variance) * SUM_SCORE_POINTS
        diff = np.max(np.abs(sum_score(P, a, b, z) - projection_sum_score(P, a, b, z)))
        S.zero("sum_score_routes", d, diff, ident, label)


def _independent_checks(S, pairs):
    for label in ("independent_gaussian", "independent_discrete"):
        P = pairs[label]
        d = pair_digest(P)
        xs = np.linspace(-3, 3, 7)
        x, y = np.meshgrid(xs, xs)
        m = fn.m_function(P, 0.6, 0.8, x, y)
        S.zero("m_function_independent", d, float(np.max(np.abs(m))), 1e-10, label)
        S.zero("alpha_exact_independent", d, mx.alpha_exact(mx.base_law(P)), 1e-15, label)
        rep = mx.alpha_smoothed_pair(P, S.config.suite.cells, with_delta4=False)
        S.upper("alpha_smoothed_independent", d, rep.alpha, rep.cell_error_bound, 1e-12,
                label)
        S.zero("delta_n_independent", d, mx.delta_n_coefficient(P, 4), 1e-8, label)


def _alpha_exactness(S):
    coin = mx.FiniteJointLaw([0.0, 1.0], [0.0, 1.0], [[0.5, 0.0], [0.0, 0.5]])
    S.zero("alpha_exact_coin", digest("coin"), mx.alpha_exact(coin) - 0.25, 1e-15, "coin")
    for p in (0.25, 0.75):
        spec = ProcessSpec("markov_fn", flip_prob=p)
        lam = 1.0 - 2.0 * p
        for t in (1, 2, 3, 5, 8):
            law = markov_joint_law(spec, t)
            S.zero("alpha_exact_markov", digest("chain", p, t),
                   mx.alpha_exact(law) - abs(lam) ** t / 4, 1e-15, f"p={p:g} t={t}")


def _rectangle_checks(S, blocks):
    """Rectangle estimates from samples of exact block laws never exceed alpha."""
    count = S.config.mc_count
    tol = 3.0 / math.sqrt(count)
    for (p, gap), (P, law) in blocks.items():
        if gap not in (0, max(S.config.suite.gaps)):
            continue
        rng = np.random.default_rng(np.random.SeedSequence(
            S.config.process.seed, spawn_key=(2, int(p * 100), gap)))
        flat = rng.choice(law.probs.size, size=count, p=law.probs.ravel())
        i, j = np.unravel_index(flat, law.probs.shape)
        est = mx.alpha_estimate_rectangles(law.row_states[i], law.col_states[j])
        S.upper("alpha_rectangles_below_exact", pair_digest(P), est,
                mx.alpha_exact(law), tol, f"p={p:g} gap={gap}")


def _mixing_pair_checks(S, pairs, blocks):
    cells = S.config.suite.cells
    every = dict(pairs)
    for (p, gap), (P, _) in blocks.items():
        every[f"block p={p:g} gap={gap}"] = P
    for label, P in every.items():
        d = pair_digest(P)
        rep = mx.alpha_smoothed_pair(P, cells)
        S.upper("alpha_delta4_ordering", d, 4 * rep.alpha,
                rep.delta4 + rep.cell_error_bound, S.tol["quadrature"], label)
        slack = mx.density_difference_bound_check(P)
        S.upper("density_difference_bound", d, slack, 0.0, S.tol["pointwise"], label)
    catalog = [("indicator(0)", mx.indicator(0.0)), ("centred(0)", mx.centred_indicator(0.0)),
               ("clip(1)", mx.clipped_identity(1.0)),
               ("kernel(0.5)", mx.gaussian_kernel(0.5, S.config.tau))]
    for label, P in every.items():
        law = mx.base_law(P)
        for n1, xi in catalog:
            for n2, nu in catalog:
                S.lower("covariance_bound", pair_digest(P),
                        mx.covariance_bound_check(law, xi, nu), 0.0, 1e-8,
                        f"{label} {n1} x {n2}")


def _window_term_checks(S, blocks):
    beta = 0.5
    for (p, gap), (P, law) in blocks.items():
        d = pair_digest(P)
        alpha = mx.alpha_exact(law)
        tag = f"p={p:g} gap={gap}"
        for B in S.config.suite.windows:
            v, b = fn.window_m_term(P, beta, B, alpha)
            S.upper("window_m_term_bound", d, v, b, S.tol["quadrature"], f"{tag} B={B:g}")
            v, b = fn.offwindow_term(P, beta, B)
            S.upper("offwindow_term_bound", d, v, b, S.tol["quadrature"], f"{tag} B={B:g}")
            v, b = fn.product_term(P, B, alpha)
            S.upper("product_term_bound", d, abs(v), b, S.tol["quadrature"], f"{tag} B={B:g}")


def _subadditivity_checks(S, pairs, blocks):
    """Fit one ``C`` so the mixing correction covers every sub-additivity deficit."""
    eps = S.config.suite.fit_eps
    power = 1.0 / 3.0 - eps
    entries = []
    for label, P in pairs.items():
        entries.append((label, P, mx.alpha_exact(mx.base_law(P))))
    for (p, gap), (P, law) in blocks.items():
        entries.append((f"block p={p:g} gap={gap}", P, mx.alpha_exact(law)))
    gaps, alphas, rows = [], [], []
    for label, P, alpha in entries:
        for beta in S.config.suite.betas:
            g = fn.subadditivity_gap(P, beta)
            gaps.append(g)
            alphas.append(alpha)
            rows.append((label, P, alpha, beta, g))
    C = fn.fit_subadditivity_constant(gaps, alphas, eps, S.tol["identity"])
    corpus = digest("subadditivity", *(pair_digest(P) for _, P, _ in entries))
    S.reports.append(InequalityReport("subadditivity_constant", corpus, C, math.inf,
                                      math.inf, S.tol["identity"], math.isfinite(C),
                                      f"eps={eps:g}"))
    for label, P, alpha, beta, g in rows:
        S.lower("subadditivity_fitted", pair_digest(P), g + C * alpha ** power, 0.0,
                S.tol["identity"], f"{label} beta={beta:g}")
    gaps_cfg = S.config.suite.gaps
    g0, g1 = min(gaps_cfg), max(gaps_cfg)
    for p in (0.25, 0.75):
        t0 = C * mx.alpha_exact(blocks[(p, g0)][1]) ** power
        t1 = C * mx.alpha_exact(blocks[(p, g1)][1]) ** power
        S.upper("correction_decay", corpus, t1, 0.5 * t0, 0.0 if t0 > 0 else 1e-15,
                f"p={p:g} gap {g0} -> {g1}")


def _stability_checks(S, pairs, blocks):
    eps_grid = tuple(sorted(S.config.suite.eps_grid, reverse=True))
    B = 3.0
    targets = {k: pairs[k] for k in ("comonotone", "countermonotone", "independent_discrete")}
    targets["block p=0.25 gap=0"] = blocks[(0.25, min(S.config.suite.gaps))][0]
    table = {label: mx.mixing_stability(P, eps_grid, B, S.config.suite.cells)
             for label, P in targets.items()}
    eps_all = [r.eps for rows in table.values() for r in rows]
    ex_all = [max(r.excess, r.tv_window) for rows in table.values() for r in rows]
    C = mx.fit_stability_constant(eps_all, ex_all)
    corpus = digest("stability", *(pair_digest(P) for P in targets.values()))
    S.reports.append(InequalityReport("stability_constant", corpus, C, math.inf, math.inf,
                                      S.tol["quadrature"], math.isfinite(C), ""))
    for label, rows in table.items():
        d = pair_digest(targets[label])
        for r in rows:
            bound = mx.stability_bound(r.eps, C)
            S.upper("mixing_stability", d, r.excess, bound, S.tol["quadrature"],
                    f"{label} eps={r.eps:g}")
            S.upper("tv_window_bound", d, r.tv_window, bound, S.tol["quadrature"],
                    f"{label} eps={r.eps:g}")
        tv = [r.tv_window for r in rows]
        worst = max((b - a for a, b in zip(tv, tv[1:])), default=0.0)
        S.upper("tv_window_monotone", d, worst, 0.0, S.tol["quadrature"], label)


def run_inequality_suite(config: ExperimentConfig):
    """Run every check in :data:`SUITE_MANIFEST` over the built-in corpus.

    Returns a list of :class:`InequalityReport`, one per check per corpus
    element.  The suite passes iff every report passes.
    """
    S = _Suite(config)
    scalars = scalar_corpus(config)
    pairs = analytic_pairs(config.tau)
    blocks = block_corpus(config)
    betas = config.suite.betas
    block_subset = {f"block p={p:g} gap={g}": blocks[(p, g)][0]
                    for p in (0.25, 0.75) for g in (min(config.suite.gaps),)}

    _scalar_checks(S, scalars)
    _pair_checks(S, {**pairs, **block_subset}, betas)
    _independent_checks(S, pairs)
    _alpha_exactness(S)
    _rectangle_checks(S, blocks)
    _mixing_pair_checks(S, pairs, blocks)
    _window_term_checks(S, blocks)
    _subadditivity_checks(S, pairs, blocks)
    _stability_checks(S, pairs, blocks)
    return S.reports


def suite_passed(reports):
    return all(r.passed for r in reports)


def failed_checks(reports):
    return [r for r in reports if not r.passed]
