import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from entclt.errors import DomainError, NumericError
from entclt.smoothed import (AtomCloud, GridSpec, SmoothedPair, SmoothedScalar,
                             add_noise, add_noise_pair, density,
                             density_derivative, pair_density,
                             pair_partial_score, projection_sum_score, rescale,
                             score, standardize, sum_score)


def mixture_pdf(x, atoms, weights, tau):
    return sum(w * stats.norm.pdf(x, s, math.sqrt(tau)) for s, w in zip(atoms, weights))


def two_point(tau=1.0):
    return SmoothedScalar.from_atoms([-1.0, 1.0], [0.5, 0.5], tau)


class TestGridSpec:
    def test_trapezoid_weights_sum_to_width(self):
        g = GridSpec(-2.0, 3.0, 101)
        assert g.weights().sum() == pytest.approx(5.0)
        assert g.nodes()[0] == -2.0 and g.nodes()[-1] == 3.0

    def test_midpoint_rule(self):
        g = GridSpec(0.0, 1.0, 200, rule="midpoint")
        assert g.integrate(g.nodes() ** 2) == pytest.approx(1 / 3, abs=1e-5)

    @pytest.mark.parametrize("lo,hi,n", [(1.0, 0.0, 100), (0.0, 1.0, 10)])
    def test_rejects_bad_grids(self, lo, hi, n):
        with pytest.raises(DomainError):
            GridSpec(lo, hi, n)


class TestAtomCloud:
    def test_weights_renormalised_and_frozen(self):
        c = AtomCloud([0.0, 1.0, 2.0], [0.2, 0.0, 0.8])
        assert c.atoms.tolist() == [0.0, 2.0]
        with pytest.raises(ValueError):
            c.weights[0] = 1.0

    def test_weight_sum_checked(self):
        with pytest.raises(DomainError):
            AtomCloud([0.0, 1.0], [0.5, 0.6])

    def test_from_samples_merges_repeats(self):
        c = AtomCloud.from_samples([1.0, -1.0, 1.0, 1.0])
        np.testing.assert_array_equal(c.atoms, [-1.0, 1.0])
        np.testing.assert_allclose(c.weights, [0.25, 0.75])

    def test_moments(self):
        c = AtomCloud([-1.0, 3.0], [0.75, 0.25])
        assert c.mean == pytest.approx(0.0)
        assert c.variance == pytest.approx(3.0)
        assert c.second_moment == pytest.approx(3.0)

    def test_csv_round_trip(self, tmp_path):
        c = AtomCloud([0.1, 1 / 3, 2.5], [0.2, 0.3, 0.5])
        c.to_csv(tmp_path / "c.csv")
        back = AtomCloud.from_csv(tmp_path / "c.csv")
        np.testing.assert_array_equal(back.atoms, c.atoms)
        np.testing.assert_array_equal(back.weights, c.weights)
        assert (tmp_path / "c.csv").read_text().splitlines()[0] == "atom,weight"


class TestScalarEvaluation:
    def test_standard_gaussian_density(self):
        assert density(SmoothedScalar.gaussian(1.0), 0.0) == pytest.approx(0.398942, abs=1e-6)
        assert density(two_point(), 0.0) == pytest.approx(0.241971, abs=1e-6)

    def test_two_point_score(self):
        X = two_point()
        assert score(X, 0.0) == 0.0
        phi = stats.norm.pdf
        expected = -2 * phi(2.0) / (phi(0.0) + phi(2.0))
        assert score(X, 1.0) == pytest.approx(expected, abs=1e-12)
        assert score(X, 1.0) == pytest.approx(-0.23840, abs=1e-5)
        assert score(SmoothedScalar.gaussian(1.0), 2.0) == -2.0

    def test_gaussian_score_is_linear(self):
        X = SmoothedScalar.gaussian(2.0, mean=1.0)
        x = np.linspace(-5, 5, 11)
        np.testing.assert_allclose(score(X, x), -(x - 1.0) / 2.0, atol=1e-14)

    def test_density_matches_scipy(self):
        atoms, w = [-1.2, 0.3, 2.0], [0.3, 0.5, 0.2]
        X = SmoothedScalar.from_atoms(atoms, w, 0.7)
        x = np.linspace(-4, 5, 37)
        np.testing.assert_allclose(density(X, x), mixture_pdf(x, atoms, w, 0.7),
                                   rtol=1e-12)

    def test_score_is_log_derivative(self):
        X = SmoothedScalar.from_atoms([-1.2, 0.3, 2.0], [0.3, 0.5, 0.2], 0.7)
        x = np.linspace(-3, 4, 15)
        h = 1e-5
        fd = (np.log(density(X, x + h)) - np.log(density(X, x - h))) / (2 * h)
        np.testing.assert_allclose(score(X, x), fd, atol=1e-8)
        np.testing.assert_allclose(density_derivative(X, x),
                                   density(X, x) * score(X, x), atol=1e-14)

    def test_far_tail_stays_finite(self):
        X = two_point(0.05)
        lp, rho = X.evaluate(np.array([60.0, -60.0]))
        assert np.all(np.isfinite(lp)) and np.all(np.isfinite(rho))
        np.testing.assert_allclose(rho, [-59.0 / 0.05, 59.0 / 0.05], rtol=1e-12)

    def test_non_finite_input_rejected(self):
        with pytest.raises(DomainError):
            density(two_point(), np.nan)

    def test_normalisation(self):
        X = SmoothedScalar.from_atoms([-2.0, 0.0, 5.0], [0.2, 0.5, 0.3], 0.5)
        val, _ = integrate.quad(lambda t: density(X, t), -12, 15, points=[-2, 0, 5], limit=200)
        assert val == pytest.approx(1.0, abs=1e-10)

    def test_tail_mass_and_cdf(self):
        X = SmoothedScalar.gaussian(1.0)
        assert X.cdf(0.0) == pytest.approx(0.5)
        assert X.tail_mass(-1.0, 1.0) == pytest.approx(2 * stats.norm.sf(1.0))


class TestTransforms:
    def test_add_noise_adds_variance(self):
        X = two_point(0.5)
        Y = add_noise(X, 0.25)
        assert Y.tau == pytest.approx(0.75)
        assert Y.variance == pytest.approx(X.variance + 0.25)

    def test_rescale_density(self):
        X = two_point(0.5)
        Y = rescale(X, -2.0)
        x = np.linspace(-3, 3, 13)
        np.testing.assert_allclose(density(Y, x), density(X, x / -2.0) / 2.0, rtol=1e-12)

    def test_rescale_zero_rejected(self):
        with pytest.raises(DomainError):
            rescale(two_point(), 0.0)

    def test_standardize(self):
        X = SmoothedScalar.from_atoms([0.0, 4.0], [0.25, 0.75], 2.0)
        U = standardize(X)
        assert U.mean == pytest.approx(0.0, abs=1e-14)
        assert U.variance == pytest.approx(1.0)


def correlated_pair(tau=1.0):
    return SmoothedPair([[-1, -1], [1, 1], [1, -1]], [0.4, 0.4, 0.2], tau)


class TestPair:
    def test_pair_density_example(self):
        P = SmoothedPair([[-1, -1], [1, 1]], [0.5, 0.5], 1.0)
        assert pair_density(P, 0.0, 0.0) == pytest.approx(0.058550, abs=1e-6)

    def test_product_pair_factorises(self):
        X = two_point(0.5)
        Y = SmoothedScalar.from_atoms([0.0, 2.0], [0.3, 0.7], 0.5)
        P = SmoothedPair.product(X, Y)
        x, y = np.meshgrid(np.linspace(-2, 3, 6), np.linspace(-2, 3, 6))
        np.testing.assert_allclose(pair_density(P, x, y), density(X, x) * density(Y, y),
                                   rtol=1e-12)
        np.testing.assert_allclose(pair_partial_score(P, 2, x, y), score(Y, y), atol=1e-12)

    def test_partial_scores_match_finite_differences(self):
        P = correlated_pair()
        x, y, h = 0.3, -0.7, 1e-5
        lp = lambda a, b: math.log(pair_density(P, a, b))
        d1 = (lp(x + h, y) - lp(x - h, y)) / (2 * h)
        d2 = (lp(x, y + h) - lp(x, y - h)) / (2 * h)
        assert pair_partial_score(P, 1, x, y) == pytest.approx(d1, abs=1e-8)
        assert pair_partial_score(P, 2, x, y) == pytest.approx(d2, abs=1e-8)

    def test_pair_normalisation(self):
        P = correlated_pair(0.5)
        val, _ = integrate.dblquad(lambda y, x: pair_density(P, x, y), -8, 8, -8, 8,
                                   epsabs=1e-11)
        assert val == pytest.approx(1.0, abs=1e-9)

    def test_marginals(self):
        P = correlated_pair()
        X = P.marginal_x()
        assert density(X, 0.4) == pytest.approx(mixture_pdf(0.4, [-1, 1], [0.4, 0.6], 1.0))
        y = np.linspace(-8, 8, 4001)
        direct = density(X, 0.4)
        via_pair = integrate.trapezoid(pair_density(P, 0.4, y), y)
        assert via_pair == pytest.approx(direct, abs=1e-10)

    def test_sum_score_routes_agree(self):
        P = correlated_pair()
        a, b = math.sqrt(0.3), math.sqrt(0.7)
        z = np.linspace(-3, 3, 9)
        np.testing.assert_allclose(sum_score(P, a, b, z),
                                   projection_sum_score(P, a, b, z), atol=1e-9)
        sum_score(P, a, b, z, check=True)

    def test_sum_score_check_detects_disagreement(self, monkeypatch):
        import entclt.smoothed as sm
        P = correlated_pair()
        monkeypatch.setattr(sm, "projection_sum_score", lambda *a, **k: np.asarray(5.0))
        with pytest.raises(NumericError):
            sm.sum_score(P, 0.6, 0.8, 0.1, check=True)

    def test_sum_of_independent_gaussians(self):
        g = SmoothedScalar.gaussian(0.5)
        P = SmoothedPair.product(g, g)
        z = np.linspace(-2, 2, 5)
        np.testing.assert_allclose(sum_score(P, 0.6, 0.8, z), -z / 0.5, atol=1e-13)

    def test_one_sided_noise(self):
        P = correlated_pair(0.5)
        W = add_noise_pair(P, 0.3, 1)
        assert W.marginal_x().tau == pytest.approx(0.8)
        assert W.marginal_y().tau == pytest.approx(0.5)
        val, _ = integrate.dblquad(lambda y, x: pair_density(W, x, y), -9, 9, -9, 9,
                                   epsabs=1e-11)
        assert val == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(
    atoms=st.lists(st.floats(-3, 3), min_size=1, max_size=6),
    tau=st.floats(0.05, 4.0),
    x=st.floats(-20, 20),
)
def test_score_matches_posterior_mean(atoms, tau, x):
    w = np.full(len(atoms), 1.0 / len(atoms))
    X = SmoothedScalar.from_atoms(atoms, w, tau)
    # oracle: -E[x - S | x] / tau with posterior weights in the log domain
    a = np.asarray(X.atoms)
    logpost = np.log(X.weights) - (x - a) ** 2 / (2 * tau)
    post = np.exp(logpost - logpost.max())
    post /= post.sum()
    expected = -np.dot(post, x - a) / tau
    assert score(X, x) == pytest.approx(expected, rel=1e-9, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(atoms=st.lists(st.floats(-3, 3), min_size=1, max_size=5), tau=st.floats(0.1, 3.0))
def test_density_integrates_to_one(atoms, tau):
    X = SmoothedScalar.from_atoms(atoms, np.full(len(atoms), 1.0 / len(atoms)), tau)
    g = X.default_grid()
    assert g.integrate(density(X, g.nodes())) == pytest.approx(1.0, abs=1e-9)
