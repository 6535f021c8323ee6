import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.stats import chi2 as scipy_chi2

from kftune.consistency import (
    COST_CAP,
    average_stats,
    build_record,
    chi2_bounds,
    chi2_inverse_cdf,
    fraction_in_bounds,
    j_cost,
    nees,
    nis,
    record_to_csv,
)
from kftune.kalman import GaussianBelief
from kftune.linalg import NotPositiveDefiniteError
from kftune.lti_model import discretize, van_loan_q
from kftune.tuner import candidate_filter_model, monte_carlo_runs


class TestNeesNis:
    def test_zero_error(self):
        assert nees([1.0, 2.0], GaussianBelief(mean=[1.0, 2.0], cov=np.eye(2))) == 0.0

    def test_identity_covariance(self):
        assert_allclose(nees([1.0, 1.0], GaussianBelief(mean=[0.0, 0.0], cov=np.eye(2))), 2.0)

    def test_scaled_covariance(self):
        belief = GaussianBelief(mean=[0.0, 0.0], cov=np.diag([4.0, 4.0]))
        assert_allclose(nees([2.0, 0.0], belief), 1.0)

    def test_nis_zero(self):
        assert nis([0.0], [[2.0]]) == 0.0

    def test_nis_identity(self):
        assert_allclose(nis([3.0], [[1.0]]), 9.0)

    def test_nis_scalar(self):
        assert_allclose(nis([2.0], [[2.0]]), 2.0)

    def test_requires_pd(self):
        with pytest.raises(NotPositiveDefiniteError):
            nis([1.0], [[0.0]])


class TestAverageStats:
    def test_single_run_passthrough(self):
        assert_allclose(average_stats([[1.0, 2.0, 3.0]]), [1.0, 2.0, 3.0])

    def test_two_rows(self):
        assert_allclose(average_stats([[1.0, 3.0], [3.0, 1.0]]), [2.0, 2.0])

    def test_clt_concentration(self):
        rng = np.random.default_rng(42)
        per_run = rng.chisquare(2, size=(10, 2000))
        avg = average_stats(per_run)
        bound = 3.0 * np.sqrt(2.0 * 2.0 / 10.0)
        assert np.mean(np.abs(avg - 2.0) <= bound) >= 0.99

    def test_rejects_ragged(self):
        with pytest.raises(ValueError):
            average_stats(np.array([[1.0, 2.0], [1.0]], dtype=object))


class TestChi2Quantiles:
    def test_exponential_median(self):
        assert_allclose(chi2_inverse_cdf(0.5, 2), 1.3862943611198906, atol=1e-8)

    def test_tail_examples(self):
        assert_allclose(chi2_inverse_cdf(0.95, 2), 5.991464547107979, atol=1e-6)
        assert_allclose(chi2_inverse_cdf(0.975, 20), 34.16960690283833, atol=1e-6)

    @pytest.mark.parametrize("dof", [1, 2, 5, 20, 100, 400])
    @pytest.mark.parametrize("p", [0.005, 0.025, 0.5, 0.975, 0.995])
    def test_against_scipy(self, p, dof):
        assert_allclose(chi2_inverse_cdf(p, dof), scipy_chi2.ppf(p, dof), atol=1e-6, rtol=1e-9)

    def test_rejects_bad_probability(self):
        with pytest.raises(ValueError):
            chi2_inverse_cdf(0.0, 2)
        with pytest.raises(ValueError):
            chi2_inverse_cdf(1.0, 2)


class TestChi2Bounds:
    def test_single_run(self):
        lo, hi = chi2_bounds(0.05, 1, 2)
        assert_allclose(lo, 0.05063561596857975, atol=1e-6)
        assert_allclose(hi, 7.377758908227871, atol=1e-6)

    def test_ten_runs(self):
        lo, hi = chi2_bounds(0.05, 10, 2)
        assert_allclose(lo, 0.9590777392264866, atol=1e-6)
        assert_allclose(hi, 3.416960690283833, atol=1e-6)

    @pytest.mark.parametrize("alpha", [0.01, 0.05, 0.5, 0.99])
    def test_ordering(self, alpha):
        lo, hi = chi2_bounds(alpha, 5, 2)
        assert lo < hi


class TestJCost:
    def test_perfectly_consistent(self):
        assert j_cost(np.full(100, 2.0), 2) == 0.0

    def test_log_ratio_of_e(self):
        assert_allclose(j_cost(np.full(50, 2.0 * np.e), 2), 1.0, rtol=1e-12)

    def test_underconfident_half(self):
        assert_allclose(j_cost(np.full(50, 1.0), 2), 0.6931471805599453, rtol=1e-12)

    def test_time_permutation_invariance(self):
        rng = np.random.default_rng(0)
        avg = rng.chisquare(2, size=64)
        assert_allclose(j_cost(avg, 2), j_cost(rng.permutation(avg), 2), rtol=1e-12)

    def test_over_under_confidence_symmetry(self):
        for c in (0.1, 0.5, 3.0, 12.0):
            assert_allclose(j_cost(np.full(10, c * 2.0), 2), j_cost(np.full(10, 2.0 / c), 2), rtol=1e-12)

    def test_zero_average_is_capped(self):
        assert j_cost(np.zeros(10), 2) == COST_CAP


class TestMatchedFilterConsistency:
    def test_bounds_coverage_and_costs(self, robot_model, robot_scenario):
        dm = discretize(robot_model)
        nees_runs, nis_runs = monte_carlo_runs(dm, dm, robot_scenario.init, 200, 50, master_seed=42)
        record = build_record(nees_runs, nis_runs, nx=2, nz=1, alpha=0.05)
        assert fraction_in_bounds(record.avg_nees, record.bounds_nees) >= 0.9
        assert fraction_in_bounds(record.avg_nis, record.bounds_nis) >= 0.9
        assert record.j_nees <= 0.1
        assert record.j_nis <= 0.1

    def test_overconfident_filter_breaks_upper_bound(self, robot_model, robot_scenario, case1_spec):
        true_dm = discretize(robot_model)
        overconfident = candidate_filter_model(np.array([0.01]), case1_spec, robot_scenario)
        assert_allclose(overconfident.Q, van_loan_q(robot_model.A, robot_model.Gamma, [[0.01]], 0.1), rtol=1e-12)
        nees_runs, nis_runs = monte_carlo_runs(true_dm, overconfident, robot_scenario.init, 200, 50, master_seed=42)
        record = build_record(nees_runs, nis_runs, nx=2, nz=1, alpha=0.05)
        assert np.mean(record.avg_nees > record.bounds_nees[1]) >= 0.5


def test_record_csv_format(tmp_path, robot_model, robot_scenario):
    dm = discretize(robot_model)
    nees_runs, nis_runs = monte_carlo_runs(dm, dm, robot_scenario.init, 25, 5, master_seed=1)
    record = build_record(nees_runs, nis_runs, nx=2, nz=1, alpha=0.05)
    path = tmp_path / "consistency.csv"
    record_to_csv(record, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "k,avg_nees,nees_lo,nees_hi,avg_nis,nis_lo,nis_hi"
    assert len(lines) == 26
    cells = lines[1].split(",")
    assert cells[0] == "1"
    assert_allclose(float(cells[1]), record.avg_nees[0], rtol=1e-15)
