import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.stats import norm

from kftune.acquisition import SearchBox, direct_optimize, expected_improvement
from kftune.gp_surrogate import Hyperparams, fit


class FixedPosterior:
    """Stub surrogate with a constant (mu, var) posterior."""

    def __init__(self, mu, var):
        self.mu = mu
        self.var = var

    def predict(self, q):
        return self.mu, self.var


def ei_reference(mu, sigma, f_best):
    if sigma == 0.0:
        return 0.0
    z = (f_best - mu) / sigma
    return (f_best - mu) * norm.cdf(z) + sigma * norm.pdf(z)


class TestExpectedImprovement:
    def test_zero_variance_gives_zero(self):
        assert expected_improvement([0.5], FixedPosterior(0.0, 0.0), 1.0) == 0.0

    def test_at_incumbent_mean(self):
        assert_allclose(
            expected_improvement([0.5], FixedPosterior(1.0, 1.0), 1.0), 0.3989422804014327, rtol=1e-9
        )

    def test_unit_gap_value(self):
        assert_allclose(
            expected_improvement([0.5], FixedPosterior(0.0, 1.0), 1.0), 1.0833154705876864, rtol=1e-9
        )

    @pytest.mark.parametrize("mu", [-2.0, 0.0, 1.0, 5.0])
    @pytest.mark.parametrize("sigma", [1e-3, 0.5, 2.0])
    @pytest.mark.parametrize("f_best", [-1.0, 0.0, 2.0])
    def test_matches_normal_oracle(self, mu, sigma, f_best):
        got = expected_improvement([0.5], FixedPosterior(mu, sigma**2), f_best)
        assert got >= 0.0
        assert_allclose(got, max(ei_reference(mu, sigma, f_best), 0.0), atol=1e-9)

    def test_small_sigma_limit(self):
        for mu, f_best in [(0.0, 1.0), (1.0, 0.0), (0.3, 0.3)]:
            got = expected_improvement([0.5], FixedPosterior(mu, (1e-12) ** 2), f_best)
            assert_allclose(got, max(f_best - mu, 0.0), atol=1e-9)

    def test_strictly_increasing_in_sigma_at_incumbent(self):
        values = [
            expected_improvement([0.5], FixedPosterior(1.0, s**2), 1.0) for s in (0.1, 0.5, 1.0, 2.0)
        ]
        assert all(a < b for a, b in zip(values, values[1:]))

    def test_on_fitted_model(self):
        model = fit([[0.2], [0.8]], [1.0, 0.5], Hyperparams(sigma0=1.0, ell=0.3, sigma_n2=0.01))
        assert expected_improvement([0.5], model, 0.5) >= 0.0


class TestSearchBox:
    def test_requires_strict_ordering(self):
        with pytest.raises(ValueError):
            SearchBox(lower=[0.0, 1.0], upper=[1.0, 1.0])

    def test_unit_round_trip(self):
        box = SearchBox(lower=[-2.0, 1.0], upper=[4.0, 3.0])
        q = np.array([1.0, 2.5])
        assert_allclose(box.from_unit(box.to_unit(q)), q, rtol=1e-15)


class TestDirect:
    def test_quadratic_1d(self):
        box = SearchBox(lower=[0.0], upper=[1.0])
        q, f = direct_optimize(lambda x: (x[0] - 0.3) ** 2, box, budget=200)
        assert abs(q[0] - 0.3) <= 1e-3
        assert f <= 1e-6

    def test_constant_objective_returns_center(self):
        box = SearchBox(lower=[-1.0, -1.0], upper=[3.0, 5.0])
        q, f = direct_optimize(lambda x: 7.0, box, budget=100)
        assert_allclose(q, [1.0, 2.0], rtol=1e-12)
        assert f == 7.0

    def test_sphere_2d(self):
        box = SearchBox(lower=[-1.0, -1.0], upper=[1.0, 1.0])
        q, _ = direct_optimize(lambda x: float(x @ x), box, budget=500)
        assert np.linalg.norm(q) <= 5e-3

    def test_never_leaves_box(self):
        box = SearchBox(lower=[-2.0, 0.5], upper=[1.0, 4.0])
        seen = []

        def objective(x):
            seen.append(x.copy())
            return math.sin(5 * x[0]) + (x[1] - 1.0) ** 2

        direct_optimize(objective, box, budget=300)
        pts = np.array(seen)
        assert len(pts) <= 300
        assert np.all(pts[:, 0] >= -2.0) and np.all(pts[:, 0] <= 1.0)
        assert np.all(pts[:, 1] >= 0.5) and np.all(pts[:, 1] <= 4.0)

    def test_deterministic(self):
        box = SearchBox(lower=[0.0], upper=[1.0])

        def objective(x):
            return math.cos(9 * x[0]) + 0.5 * x[0]

        a = direct_optimize(objective, box, budget=250)
        b = direct_optimize(objective, box, budget=250)
        assert np.array_equal(a[0], b[0]) and a[1] == b[1]

    def test_non_finite_objective_is_penalized(self):
        box = SearchBox(lower=[0.0], upper=[1.0])

        def objective(x):
            if x[0] < 0.4:
                return math.nan
            return (x[0] - 0.6) ** 2

        q, _ = direct_optimize(objective, box, budget=150)
        assert abs(q[0] - 0.6) <= 1e-2

    def test_budget_one_returns_center(self):
        box = SearchBox(lower=[0.0], upper=[1.0])
        q, f = direct_optimize(lambda x: x[0], box, budget=1)
        assert_allclose(q, [0.5])

    def test_rejects_zero_budget(self):
        with pytest.raises(ValueError):
            direct_optimize(lambda x: 0.0, SearchBox(lower=[0.0], upper=[1.0]), budget=0)
