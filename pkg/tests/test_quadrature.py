import math

import numpy as np
import pytest

from entclt.errors import DomainError
from entclt.quadrature import (MAX_AXIS_NODES, pair_fields, pair_grid,
                               square_grid, sum_score_on_grid)
from entclt.smoothed import SmoothedPair


def pair(tau=0.5):
    return SmoothedPair([[-1, -1], [1, 1], [1, -1], [0.3, 2.0]], [0.3, 0.3, 0.2, 0.2], tau)


class TestPairGrid:
    def test_lattice_steps(self):
        a, b = math.sqrt(0.3), math.sqrt(0.7)
        g = pair_grid(pair(), a, b)
        hx = g.xs[1] - g.xs[0]
        hy = g.ys[1] - g.ys[0]
        assert a * hx == pytest.approx(b * hy)
        assert g.lattice is not None

    def test_integrates_density_to_one(self):
        P = pair()
        g = pair_grid(P)
        assert g.integrate(pair_fields(P, g).p) == pytest.approx(1.0, abs=1e-10)

    def test_fallback_for_lopsided_weights(self):
        g = pair_grid(pair(), 1e-4, 1.0)
        assert g.lattice is None

    def test_axis_cap(self):
        with pytest.raises(DomainError):
            square_grid((0, 1), (0, 1), 1.0 / (MAX_AXIS_NODES + 5))


class TestFields:
    def test_matches_pointwise(self):
        P = pair()
        g = pair_grid(P, nodes_per_sd=2.0)
        f = pair_fields(P, g)
        x, y = np.meshgrid(g.xs, g.ys, indexing="ij")
        lp, r1, r2 = P.evaluate(x, y)
        np.testing.assert_allclose(f.logp, lp, rtol=1e-12, atol=1e-9)
        np.testing.assert_allclose(f.rho1, r1, rtol=1e-9, atol=1e-9)
        np.testing.assert_allclose(f.rho2, r2, rtol=1e-9, atol=1e-9)

    def test_far_corners_finite(self):
        P = SmoothedPair([[-3, 3], [3, -3]], [0.5, 0.5], 0.05)
        g = square_grid((-6, 6), (-6, 6), 0.05)
        f = pair_fields(P, g)
        assert np.all(np.isfinite(f.logp)) and np.all(np.isfinite(f.rho1))

    @pytest.mark.parametrize("a,b", [(0.6, 0.8), (1.0, 0.0), (0.0, 1.0)])
    def test_sum_score_on_grid(self, a, b):
        P = pair()
        g = pair_grid(P, a if a and b else None, b if a and b else None, nodes_per_sd=2.0)
        got = sum_score_on_grid(P, g, a, b)
        z = a * g.xs[:, None] + b * g.ys[None, :]
        np.testing.assert_allclose(got, P.sum_law(a, b).evaluate(z)[1], atol=1e-9)
