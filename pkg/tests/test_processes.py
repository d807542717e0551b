import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from entclt import processes as pr
from entclt.errors import CapacityError, DomainError
from entclt.functionals import fisher_standardized
from entclt.mixing import alpha_estimate_rectangles, alpha_exact


def markov(p=0.25, seed=0):
    return pr.ProcessSpec("markov_fn", flip_prob=p, seed=seed)


class TestSpec:
    def test_rejects_unknown_kind(self):
        with pytest.raises(DomainError):
            pr.ProcessSpec("arma")

    def test_rejects_bad_transition(self):
        with pytest.raises(DomainError):
            pr.ProcessSpec("markov_fn", transition=((0.5, 0.6), (0.5, 0.5)))

    def test_general_chain(self):
        spec = pr.ProcessSpec("markov_fn", transition=((0.9, 0.1, 0.0), (0.2, 0.5, 0.3),
                                                       (0.0, 0.4, 0.6)),
                              states=(0.0, 1.0, 5.0))
        P, pi, f = spec.chain
        np.testing.assert_allclose(pi @ P, pi, atol=1e-14)
        assert pi @ f == pytest.approx(0.0, abs=1e-14)

    def test_with_seed(self):
        assert markov().with_seed(9).seed == 9


class TestVariances:
    @pytest.mark.parametrize("p", [0.1, 0.25, 0.4])
    def test_two_state_long_run(self, p):
        lam = 1 - 2 * p
        assert pr.long_run_variance(markov(p)) == pytest.approx((1 + lam) / (1 - lam))

    def test_catalog(self):
        assert pr.long_run_variance(pr.ProcessSpec("iid")) == 1.0
        assert pr.long_run_variance(pr.ProcessSpec("difference")) == 0.0
        assert pr.long_run_variance(pr.ProcessSpec("ma_m", theta=(1, 0.5, -0.2))) == pytest.approx(1.69)

    def test_difference_window_variance_is_constant(self):
        spec = pr.ProcessSpec("difference", innovation="uniform")
        for n in (1, 2, 7, 100):
            assert pr.window_variance(spec, n) == pytest.approx(2.0)

    def test_markov_window_variance_matches_series(self):
        spec = markov(0.25)
        lam = 0.5
        n = 20
        direct = n + 2 * sum((n - j) * lam ** j for j in range(1, n))
        assert pr.window_variance(spec, n) == pytest.approx(direct)

    def test_general_chain_long_run_against_truncated_sum(self):
        spec = pr.ProcessSpec("markov_fn", transition=((0.7, 0.3), (0.6, 0.4)), states=(0.0, 2.0))
        series = pr.autocovariance(spec, 0) + 2 * sum(pr.autocovariance(spec, j) for j in range(1, 200))
        assert pr.long_run_variance(spec) == pytest.approx(series, rel=1e-12)

    def test_empirical_approaches_long_run(self):
        spec = markov(0.25, seed=3)
        w = pr.simulate_windows(spec, 1024, 4000)
        assert w.v_n_empirical / 1024 == pytest.approx(3.0, rel=0.08)


class TestSimulation:
    @pytest.mark.parametrize("kind,innovation", [("iid", "gaussian"), ("iid", "uniform"),
                                                 ("iid", "two_point"), ("difference", "gaussian")])
    def test_unit_variance_innovations(self, kind, innovation):
        spec = pr.ProcessSpec(kind, innovation=innovation, seed=1)
        paths = pr.simulate_paths(spec, 3, 20000, 9)
        expected = 1.0 if kind == "iid" else 2.0
        assert paths[:, 0].var() == pytest.approx(expected, rel=0.05)

    def test_markov_is_stationary(self):
        paths = pr.simulate_paths(markov(0.25, seed=2), 50, 20000, 0)
        np.testing.assert_allclose(paths.mean(axis=0)[[0, 25, 49]], 0.0, atol=0.03)
        lag1 = np.mean(paths[:, 10] * paths[:, 11])
        assert lag1 == pytest.approx(0.5, abs=0.03)

    def test_deterministic(self):
        a = pr.simulate_windows(markov(seed=5), 16, 5000).sums
        b = pr.simulate_windows(markov(seed=5), 16, 5000).sums
        c = pr.simulate_windows(markov(seed=6), 16, 5000).sums
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_prefix_is_stable_across_counts(self):
        # replica blocks have their own streams, so a larger run extends a smaller one
        a = pr.simulate_windows(markov(seed=5), 8, 4096).sums
        b = pr.simulate_windows(markov(seed=5), 8, 8192).sums
        np.testing.assert_array_equal(a, b[:4096])

    def test_count_limits(self):
        with pytest.raises(CapacityError):
            pr.simulate_windows(markov(), 4, 999)
        with pytest.raises(CapacityError):
            pr.build_smoothed_vn(markov(), 4, 0.5, 4999)

    def test_window_sample_fields(self):
        w = pr.simulate_windows(pr.ProcessSpec("iid"), 4, 1000)
        assert w.n == 4 and w.v_n == 4.0
        np.testing.assert_allclose(w.normalized, w.sums / 2)


class TestExactAlpha:
    def test_catalog(self):
        assert pr.exact_alpha_lag(pr.ProcessSpec("iid"), 1) == 0.0
        ma = pr.ProcessSpec("ma_m", theta=(1, 0.5, 0.25))
        assert pr.exact_alpha_lag(ma, 3) == 0.0
        assert pr.exact_alpha_lag(ma, 2) is None

    @pytest.mark.parametrize("t", [1, 2, 5])
    def test_markov(self, t):
        assert pr.exact_alpha_lag(markov(0.25), t) == pytest.approx(0.5 ** t / 4, abs=1e-15)

    def test_rejects_lag_zero(self):
        with pytest.raises(DomainError):
            pr.exact_alpha_lag(markov(), 0)


class TestBlocks:
    def test_iid_blocks_nearly_independent(self):
        s, t = pr.simulate_block_sums(pr.ProcessSpec("iid", seed=1), 16, 16, 1, 5000)
        assert alpha_estimate_rectangles(s, t) < 3 / math.sqrt(5000)

    def test_markov_blocks_within_lag_bound(self):
        count = 5000
        s, t = pr.simulate_block_sums(markov(0.25, seed=2), 64, 64, 8, count)
        assert alpha_estimate_rectangles(s, t) <= 0.5 ** 8 / 4 + 3 / math.sqrt(count)

    def test_build_block_pair(self):
        P = pr.build_block_pair(markov(seed=4), 8, 8, 2, 0.5, 5000)
        assert P.tau == 0.5 and P.weights.sum() == pytest.approx(1.0)

    def test_exact_window_law_variance(self):
        spec = markov(0.25)
        cloud = pr.exact_window_law(spec, 12)
        assert cloud.variance == pytest.approx(pr.window_variance(spec, 12) / 12, rel=1e-12)
        assert cloud.mean == pytest.approx(0.0, abs=1e-14)

    def test_exact_block_law_matches_brute_force(self):
        # enumerate all 2^(m+gap+n) state paths of the chain
        import itertools
        p, m, n, gap = 0.3, 3, 2, 1
        spec = markov(p)
        law = pr.exact_block_law(spec, m, n, gap)
        L = m + gap + n
        acc = {}
        for path in itertools.product([0, 1], repeat=L):
            w = 0.5
            for a, b in zip(path, path[1:]):
                w *= p if a != b else 1 - p
            x = [2 * v - 1 for v in path]
            key = (round(sum(x[:m]) / math.sqrt(m), 12), round(sum(x[m + gap:]) / math.sqrt(n), 12))
            acc[key] = acc.get(key, 0.0) + w
        for (a, b), w in acc.items():
            i = np.argmin(abs(law.row_states - a))
            j = np.argmin(abs(law.col_states - b))
            assert law.probs[i, j] == pytest.approx(w, abs=1e-15)
        assert law.probs.sum() == pytest.approx(1.0)

    def test_exact_block_alpha_decays(self):
        spec = markov(0.25)
        alphas = [alpha_exact(pr.exact_block_law(spec, 6, 6, g)) for g in (0, 2, 4, 8)]
        assert all(b < a for a, b in zip(alphas, alphas[1:]))
        # the gap adds lags, so alpha at gap g is at most the lag-(g+1) value
        for g, a in zip((0, 2, 4, 8), alphas):
            assert a <= 0.5 ** (g + 1) / 4 + 1e-15

    def test_negative_gap(self):
        with pytest.raises(DomainError):
            pr.exact_block_law(markov(), 2, 2, -1)


class TestConvergenceShape:
    def test_markov_jst_drops(self):
        spec = markov(0.25, seed=11)
        j4 = fisher_standardized(pr.build_smoothed_vn(spec, 4, 0.5, 20000))
        j64 = fisher_standardized(pr.build_smoothed_vn(spec, 64, 0.5, 20000))
        assert j64 < j4

    def test_difference_bound(self):
        spec = pr.ProcessSpec("difference", innovation="uniform", seed=2)
        for n in (1, 4, 32):
            J = fisher_standardized(pr.build_smoothed_vn(spec, n, 0.5, 20000))
            assert J <= (2.0 / n) / 0.5 + 0.01


class TestTailClass:
    def test_gaussian_tail(self):
        x = np.random.default_rng(0).standard_normal(100_000)
        c = pr.fit_tail_class(x, [1, 2, 3], delta=1.0)
        assert 0.5 < c < 1.5

    def test_constant(self):
        assert pr.fit_tail_class(np.ones(10), [1, 2]) == 0.0


@settings(max_examples=20, deadline=None)
@given(p=st.floats(0.05, 0.95), t=st.integers(1, 6))
def test_markov_alpha_formula(p, t):
    assert pr.exact_alpha_lag(markov(p), t) == pytest.approx(abs(1 - 2 * p) ** t / 4, abs=1e-14)
