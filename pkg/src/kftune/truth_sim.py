"""Monte Carlo truth-model simulation with reproducible, order-independent randomness.

Each simulation run owns an RngStream identified by (master_seed, stream_id);
identical identifiers produce bit-identical trajectories no matter when or in
what order runs execute.

Draw order within one run is fixed and part of the reproducibility contract:
first the initial state x0 (n standard normals), then the process-noise block
for steps 1..T (T x n standard normals, in step order), then the
measurement-noise block (T x p standard normals, in step order).
"""

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy.linalg.lapack import dpstrf

from .formatting import write_csv
from .kalman import GaussianBelief
from .linalg import symmetrize
from .lti_model import PSD_TOL, DiscreteModel


@dataclass(frozen=True)
class RngStream:
    """Counter-based stream identity: (master_seed, stream_id) -> generator."""

    master_seed: int
    stream_id: int

    def __post_init__(self):
        if self.master_seed < 0 or self.stream_id < 0:
            raise ValueError("seeds and stream ids must be nonnegative")

    def generator(self) -> np.random.Generator:
        return np.random.default_rng((self.master_seed, self.stream_id))


@dataclass(frozen=True)
class Trajectory:
    """Ground-truth states, measurements and controls for steps k = 1..T."""

    states: np.ndarray
    measurements: np.ndarray
    controls: np.ndarray
    initial_state: np.ndarray

    def __post_init__(self):
        for name in ("states", "measurements", "controls", "initial_state"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite entries")
        t = self.states.shape[0]
        if self.measurements.shape[0] != t or self.controls.shape[0] != t:
            raise ValueError("states, measurements and controls must share length T")

    def __len__(self) -> int:
        return self.states.shape[0]


def psd_factor(cov: np.ndarray) -> np.ndarray:
    """Pivoted Cholesky factor L with cov = L Lᵀ, trailing rank-deficient columns clamped to zero."""
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    eigs = np.linalg.eigvalsh(symmetrize(cov))
    if eigs.min() < -PSD_TOL * max(float(np.trace(cov)), 1.0):
        raise ValueError("covariance is not PSD within tolerance")
    c, piv, rank, info = dpstrf(cov, lower=1)
    if info < 0:
        raise ValueError("invalid covariance input")
    lower = np.tril(c)
    lower[:, rank:] = 0.0
    full = np.zeros_like(lower)
    full[piv - 1, :] = lower
    return full


def sample_gaussian(mean: np.ndarray, cov: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One draw from N(mean, cov); cov may be singular (PSD), consuming exactly n normals."""
    mean = np.asarray(mean, dtype=float).reshape(-1)
    factor = psd_factor(cov)
    return mean + factor @ rng.standard_normal(mean.shape[0])


def control_input(k: int, dt: float, amplitude: float = 2.0, omega: float = 0.75) -> np.ndarray:
    """Low-frequency oscillating acceleration command u_k = amplitude * cos(omega * k * dt)."""
    return np.array([amplitude * np.cos(omega * k * dt)])


def simulate_truth(
    true_dm: DiscreteModel,
    init: GaussianBelief,
    n_steps: int,
    rng: RngStream,
    control: Callable[[int, float], np.ndarray] = control_input,
) -> Trajectory:
    """Simulate the true stochastic system for n_steps.

    x_0 ~ N(init.mean, init.cov); for k = 1..T:
    x_k = F x_{k-1} + B u_k + v_k, z_k = H x_k + w_k with v ~ N(0, Q), w ~ N(0, R).
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    gen = rng.generator()
    n = true_dm.n_states
    p = true_dm.n_measurements
    m = true_dm.B.shape[1]

    x0 = sample_gaussian(init.mean, init.cov, gen)
    lq = psd_factor(true_dm.Q)
    lr = psd_factor(true_dm.R)
    process_noise = gen.standard_normal((n_steps, n)) @ lq.T
    meas_noise = gen.standard_normal((n_steps, p)) @ lr.T

    states = np.empty((n_steps, n))
    measurements = np.empty((n_steps, p))
    controls = np.empty((n_steps, m))
    x = x0
    for k in range(1, n_steps + 1):
        u = np.asarray(control(k, true_dm.dt), dtype=float).reshape(-1)
        x = true_dm.F @ x + true_dm.B @ u + process_noise[k - 1]
        states[k - 1] = x
        measurements[k - 1] = true_dm.H @ x + meas_noise[k - 1]
        controls[k - 1] = u
    return Trajectory(states=states, measurements=measurements, controls=controls, initial_state=x0)


def trajectory_to_csv(traj: Trajectory, path) -> None:
    """Dump a trajectory as CSV with columns k, x1..xn, z1..zp, u1..um."""
    n = traj.states.shape[1]
    p = traj.measurements.shape[1]
    m = traj.controls.shape[1]
    header = (
        ["k"]
        + [f"x{i + 1}" for i in range(n)]
        + [f"z{i + 1}" for i in range(p)]
        + [f"u{i + 1}" for i in range(m)]
    )
    rows = (
        [k + 1, *traj.states[k], *traj.measurements[k], *traj.controls[k]]
        for k in range(len(traj))
    )
    write_csv(path, header, rows)
