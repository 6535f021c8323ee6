import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from kftune.kalman import GaussianBelief
from kftune.lti_model import DiscreteModel, discretize
from kftune.truth_sim import (
    RngStream,
    control_input,
    sample_gaussian,
    simulate_truth,
    trajectory_to_csv,
)
from kftune.tuner import monte_carlo_runs


class TestSampleGaussian:
    def test_zero_covariance_returns_mean_exactly(self):
        gen = np.random.default_rng(0)
        mean = np.array([1.0, -2.0])
        out = sample_gaussian(mean, np.zeros((2, 2)), gen)
        assert np.array_equal(out, mean)

    def test_law_of_large_numbers(self):
        gen = np.random.default_rng(7)
        draws = np.array([sample_gaussian(np.zeros(2), np.eye(2), gen) for _ in range(100_000)])
        assert np.all(np.abs(draws.mean(axis=0)) < 0.02)
        assert np.all((draws.var(axis=0) > 0.97) & (draws.var(axis=0) < 1.03))

    def test_rank_one_degeneracy(self):
        gen = np.random.default_rng(3)
        cov = np.array([[1.0, 1.0], [1.0, 1.0]])
        for _ in range(10):
            draw = sample_gaussian(np.zeros(2), cov, gen)
            assert abs(draw[0] - draw[1]) <= 1e-12

    def test_rejects_indefinite_covariance(self):
        gen = np.random.default_rng(0)
        with pytest.raises(ValueError):
            sample_gaussian(np.zeros(2), [[1.0, 0.0], [0.0, -1.0]], gen)


class TestControlInput:
    def test_cosine_at_zero(self):
        assert_allclose(control_input(0, 0.1), [2.0])

    def test_half_period_sign_flip(self):
        assert_allclose(control_input(1, 1.0, amplitude=2.0, omega=math.pi), [-2.0], atol=1e-12)

    def test_robot_value_at_step_ten(self):
        assert_allclose(control_input(10, 0.1), [1.4633777377476418], rtol=1e-12)


class TestSimulateTruth:
    def test_noiseless_system_is_deterministic_zoh(self, robot_model):
        dm = discretize(robot_model)
        # True-noise-free variant: zero process noise, vanishing measurement noise.
        quiet = DiscreteModel(F=dm.F, B=dm.B, H=dm.H, Q=np.zeros((2, 2)), R=[[1e-300]], dt=dm.dt)
        init = GaussianBelief(mean=[0.5, -0.25], cov=np.zeros((2, 2)))
        traj = simulate_truth(quiet, init, 30, RngStream(5, 1))
        x = init.mean
        for k in range(1, 31):
            x = quiet.F @ x + quiet.B @ control_input(k, quiet.dt)
            assert np.array_equal(traj.states[k - 1], x)
            assert_allclose(traj.measurements[k - 1], quiet.H @ x, atol=1e-100)

    def test_same_stream_is_bit_identical(self, robot_model, robot_scenario):
        dm = discretize(robot_model)
        a = simulate_truth(dm, robot_scenario.init, 50, RngStream(123, 9))
        b = simulate_truth(dm, robot_scenario.init, 50, RngStream(123, 9))
        assert np.array_equal(a.states, b.states)
        assert np.array_equal(a.measurements, b.measurements)
        assert np.array_equal(a.initial_state, b.initial_state)

    def test_distinct_streams_differ(self, robot_model, robot_scenario):
        dm = discretize(robot_model)
        a = simulate_truth(dm, robot_scenario.init, 50, RngStream(123, 1))
        b = simulate_truth(dm, robot_scenario.init, 50, RngStream(123, 2))
        assert not np.array_equal(a.states, b.states)

    def test_matched_filter_nees_mean_is_state_dimension(self, robot_model, robot_scenario):
        dm = discretize(robot_model)
        nees_runs, _ = monte_carlo_runs(dm, dm, robot_scenario.init, 200, 500, master_seed=77)
        time_avg = nees_runs.mean(axis=0).mean()
        assert 1.8 <= time_avg <= 2.2

    def test_fixed_step_chi_square_moments(self, robot_model, robot_scenario):
        dm = discretize(robot_model)
        nees_runs, _ = monte_carlo_runs(dm, dm, robot_scenario.init, 50, 1000, master_seed=11)
        at_k = nees_runs[:, -1]
        assert abs(at_k.mean() - 2.0) <= 0.2
        assert abs(at_k.var() - 4.0) <= 1.0

    def test_rejects_zero_steps(self, robot_model, robot_scenario):
        dm = discretize(robot_model)
        with pytest.raises(ValueError):
            simulate_truth(dm, robot_scenario.init, 0, RngStream(0, 0))


def test_trajectory_csv_dump(tmp_path, robot_model, robot_scenario):
    dm = discretize(robot_model)
    traj = simulate_truth(dm, robot_scenario.init, 10, RngStream(1, 1))
    path = tmp_path / "trajectory.csv"
    trajectory_to_csv(traj, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "k,x1,x2,z1,u1"
    assert len(lines) == 11
    first = lines[1].split(",")
    assert first[0] == "1"
    assert_allclose(float(first[1]), traj.states[0, 0], rtol=1e-15)
