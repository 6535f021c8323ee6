"""The tuning loop: seed the surrogate, then acquire/evaluate/update until done.

A design point maps to a candidate filter through its parameter roles: a
process_noise_intensity entry sets the continuous intensity V (discretized to
Q via the Van Loan construction), a measurement_noise_variance entry sets R
directly. Parameters without a role in the design keep their true values, and
the filter always uses the true dynamics (F, B, H).

Every cost evaluation runs N truth-model simulations and scores the filter's
averaged NEES (or NIS) against its chi-square ideal. By default each
evaluation draws fresh trajectories (stream ids advance with the evaluation
counter), so the objective is genuinely noisy; a common-random-numbers mode
pins the streams for debugging. Either way the whole session is a pure
function of (master_seed, config, design): rerunning it reproduces the exact
history.

Stream-id layout: stream 0 seeds the space-filling design, streams
1 + e * N + i cover run i of evaluation e (fresh mode) and 1 + i (pinned mode).
"""

import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from .acquisition import SearchBox, direct_optimize, expected_improvement
from .consistency import (
    COST_CAP,
    ConsistencyRecord,
    average_stats,
    build_record,
    j_cost,
)
from .formatting import write_csv
from .gp_surrogate import Hyperparams, SurrogateModel, fit, learn_hyperparams
from .kalman import GaussianBelief
from .linalg import NotPositiveDefiniteError, chol_solve, cholesky_pd, solve_lower, symmetrize
from .lti_model import ContinuousModel, DiscreteModel, discretize, discretize_r, van_loan_q, zoh_discretize
from .truth_sim import RngStream, control_input, simulate_truth

ROLE_PROCESS_NOISE = "process_noise_intensity"
ROLE_MEASUREMENT_NOISE = "measurement_noise_variance"
_ROLES = (ROLE_PROCESS_NOISE, ROLE_MEASUREMENT_NOISE)

_INITIAL_HYPER = Hyperparams(sigma0=1.0, ell=0.3, sigma_n2=1e-4)
# Hyperparameters are refit every iteration early on, then on a fixed cadence.
_REFIT_EVERY_ITERATION_UNTIL = 10
_REFIT_CADENCE = 5


@dataclass(frozen=True)
class DesignParameter:
    name: str
    role: str
    lower: float
    upper: float

    def __post_init__(self):
        if self.role not in _ROLES:
            raise ValueError(f"unknown parameter role: {self.role!r}")
        if not self.lower < self.upper:
            raise ValueError(f"parameter {self.name}: lower bound must be below upper bound")


@dataclass(frozen=True)
class DesignSpec:
    """Ordered tunable parameters plus the cost statistic they are scored on."""

    parameters: tuple[DesignParameter, ...]
    cost_kind: str = "nees"

    def __post_init__(self):
        object.__setattr__(self, "parameters", tuple(self.parameters))
        if not 1 <= len(self.parameters) <= 8:
            raise ValueError("design dimension must be between 1 and 8")
        if self.cost_kind not in ("nees", "nis"):
            raise ValueError("cost_kind must be 'nees' or 'nis'")

    @property
    def d(self) -> int:
        return len(self.parameters)

    @property
    def box(self) -> SearchBox:
        return SearchBox(
            lower=np.array([p.lower for p in self.parameters]),
            upper=np.array([p.upper for p in self.parameters]),
        )


@dataclass(frozen=True)
class TunerConfig:
    n_runs: int = 10
    horizon: int = 200
    n_seed: int = 5
    max_iterations: int = 35
    alpha: float = 0.05
    master_seed: int = 0
    acquisition_budget: int = 500
    stall_tolerance: float = 1e-4
    stall_iterations: int = 15
    fresh_trajectories: bool = True

    def __post_init__(self):
        if self.n_runs < 1 or self.horizon < 1:
            raise ValueError("n_runs and horizon must be >= 1")
        if self.n_seed < 2:
            raise ValueError("n_seed must be >= 2")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")


@dataclass(frozen=True)
class Scenario:
    """The true system: continuous model (with true V, W), initial belief, control law."""

    model: ContinuousModel
    init: GaussianBelief
    control: Callable[[int, float], np.ndarray] = control_input


@dataclass
class TuningSession:
    history: list[tuple[np.ndarray, float]]
    surrogate: SurrogateModel | None
    incumbent_q: np.ndarray
    incumbent_cost: float
    iterations: int
    config: TunerConfig
    spec: DesignSpec

    @property
    def incumbent(self) -> tuple[np.ndarray, float]:
        return self.incumbent_q, self.incumbent_cost


def seed_design(box: SearchBox, n_seed: int, rng: RngStream) -> list[np.ndarray]:
    """Latin-hypercube sample: one stratum per point per dimension, permutations pairing them."""
    if n_seed < 2:
        raise ValueError("n_seed must be >= 2")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    u = np.empty((n_seed, box.d))
    for j in range(box.d):
        strata = gen.permutation(n_seed)
        u[:, j] = (strata + gen.random(n_seed)) / n_seed
    return [box.from_unit(u[i]) for i in range(n_seed)]


def _role_values(q: np.ndarray, spec: DesignSpec, role: str) -> list[float]:
    return [float(q[i]) for i, p in enumerate(spec.parameters) if p.role == role]


def _noise_matrix(values: list[float], size: int, what: str) -> np.ndarray:
    if len(values) == 1:
        return values[0] * np.eye(size)
    if len(values) == size:
        return np.diag(values)
    raise ValueError(f"{what}: expected 1 or {size} parameters, got {len(values)}")


def candidate_filter_model(q: np.ndarray, spec: DesignSpec, scenario: Scenario) -> DiscreteModel:
    """Filter model at design point q: true dynamics, candidate noise covariances."""
    cm = scenario.model
    v_values = _role_values(q, spec, ROLE_PROCESS_NOISE)
    r_values = _role_values(q, spec, ROLE_MEASUREMENT_NOISE)
    v = _noise_matrix(v_values, cm.Gamma.shape[1], "process noise design") if v_values else cm.V
    if r_values:
        r = _noise_matrix(r_values, cm.n_measurements, "measurement noise design")
    else:
        r = discretize_r(cm.W, cm.dt)
    f, b = zoh_discretize(cm)
    q_cov = van_loan_q(cm.A, cm.Gamma, v, cm.dt)
    return DiscreteModel(F=f, B=b, H=cm.H, Q=q_cov, R=r, dt=cm.dt)


def truth_parameters(spec: DesignSpec, scenario: Scenario) -> np.ndarray:
    """The design-space point corresponding to the true noise parameters."""
    cm = scenario.model
    r_true = discretize_r(cm.W, cm.dt)
    values = []
    v_seen = 0
    r_seen = 0
    for p in spec.parameters:
        if p.role == ROLE_PROCESS_NOISE:
            values.append(float(cm.V[v_seen, v_seen]))
            v_seen += 1
        else:
            values.append(float(r_true[r_seen, r_seen]))
            r_seen += 1
    return np.array(values)


def _filter_sequences(filter_dm: DiscreteModel, init: GaussianBelief, n_steps: int):
    """Precompute the data-independent gain/covariance sequence of an LTI filter.

    Returns per-step Kalman gains, Cholesky factors of the innovation
    covariances S_k, and Cholesky factors of the posterior covariances P_k.
    """
    f, h, q, r = filter_dm.F, filter_dm.H, filter_dm.Q, filter_dm.R
    gains, chol_s, chol_p = [], [], []
    p = init.cov
    for _ in range(n_steps):
        p_pred = symmetrize(f @ p @ f.T + q)
        s = symmetrize(h @ p_pred @ h.T + r)
        ls = cholesky_pd(s, "innovation covariance")
        gain = chol_solve(ls, h @ p_pred).T
        p = symmetrize(p_pred - gain @ s @ gain.T)
        gains.append(gain)
        chol_s.append(ls)
        chol_p.append(cholesky_pd(p, "posterior covariance"))
    return gains, chol_s, chol_p


def monte_carlo_runs(
    true_dm: DiscreteModel,
    filter_dm: DiscreteModel,
    init: GaussianBelief,
    n_steps: int,
    n_runs: int,
    master_seed: int,
    stream_base: int = 1,
    control: Callable[[int, float], np.ndarray] = control_input,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-run NEES and NIS samples, shape (n_runs, n_steps).

    Run i draws its trajectory from RngStream(master_seed, stream_base + i).
    The filter pass is batched across runs; since the gain sequence of an LTI
    filter is data-independent this is exactly the per-run recursion.
    """
    trajectories = [
        simulate_truth(true_dm, init, n_steps, RngStream(master_seed, stream_base + i), control)
        for i in range(n_runs)
    ]
    gains, chol_s, chol_p = _filter_sequences(filter_dm, init, n_steps)

    f, b, h = filter_dm.F, filter_dm.B, filter_dm.H
    means = np.tile(init.mean, (n_runs, 1))
    nees_runs = np.empty((n_runs, n_steps))
    nis_runs = np.empty((n_runs, n_steps))
    z_all = np.stack([t.measurements for t in trajectories])
    x_all = np.stack([t.states for t in trajectories])
    u_all = trajectories[0].controls
    for k in range(n_steps):
        means = means @ f.T + b @ u_all[k]
        innovations = z_all[:, k, :] - means @ h.T
        means = means + innovations @ gains[k].T
        err = x_all[:, k, :] - means
        y = solve_lower(chol_p[k], err.T)
        nees_runs[:, k] = np.sum(y * y, axis=0)
        y = solve_lower(chol_s[k], innovations.T)
        nis_runs[:, k] = np.sum(y * y, axis=0)
    return nees_runs, nis_runs


def _stream_base(config: TunerConfig, eval_index: int) -> int:
    if config.fresh_trajectories:
        return 1 + eval_index * config.n_runs
    return 1


def evaluate_cost(
    q: np.ndarray,
    spec: DesignSpec,
    config: TunerConfig,
    scenario: Scenario,
    eval_index: int = 0,
) -> float:
    """Monte Carlo consistency cost of the candidate filter at design point q.

    Degenerate candidates (non-PD covariances anywhere in the filter recursion)
    score COST_CAP instead of raising, so the optimizer sees a finite surface.
    """
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.shape[0] != spec.d:
        raise ValueError("design point dimension does not match the spec")
    if not spec.box.contains(q):
        raise ValueError("design point lies outside the search box")
    try:
        filter_dm = candidate_filter_model(q, spec, scenario)
        true_dm = discretize(scenario.model)
        nees_runs, nis_runs = monte_carlo_runs(
            true_dm,
            filter_dm,
            scenario.init,
            config.horizon,
            config.n_runs,
            config.master_seed,
            _stream_base(config, eval_index),
            scenario.control,
        )
    except NotPositiveDefiniteError:
        return COST_CAP
    if spec.cost_kind == "nees":
        return j_cost(average_stats(nees_runs), true_dm.n_states)
    return j_cost(average_stats(nis_runs), true_dm.n_measurements)


def consistency_at(
    q: np.ndarray,
    spec: DesignSpec,
    config: TunerConfig,
    scenario: Scenario,
    eval_index: int = 0,
) -> ConsistencyRecord:
    """Full consistency record (averages, bounds, costs) at a design point."""
    filter_dm = candidate_filter_model(np.asarray(q, dtype=float).reshape(-1), spec, scenario)
    true_dm = discretize(scenario.model)
    nees_runs, nis_runs = monte_carlo_runs(
        true_dm,
        filter_dm,
        scenario.init,
        config.horizon,
        config.n_runs,
        config.master_seed,
        _stream_base(config, eval_index),
        scenario.control,
    )
    return build_record(nees_runs, nis_runs, true_dm.n_states, true_dm.n_measurements, config.alpha)


def run_gpbo(spec: DesignSpec, config: TunerConfig, scenario: Scenario) -> TuningSession:
    """Seeded GP Bayesian optimization of the consistency cost.

    Seeds the surrogate with a Latin-hypercube design, then loops: maximize EI
    with DIRECT, evaluate the new point, refit (hyperparameters on their
    schedule), and update the incumbent. Stops at max_iterations or once the
    incumbent has improved by less than stall_tolerance for stall_iterations
    consecutive iterations.
    """
    box = spec.box
    unit_box = SearchBox(lower=np.zeros(spec.d), upper=np.ones(spec.d))

    history: list[tuple[np.ndarray, float]] = []
    for i, q in enumerate(seed_design(box, config.n_seed, RngStream(config.master_seed, 0))):
        history.append((q, evaluate_cost(q, spec, config, scenario, eval_index=i)))

    inputs = np.array([box.to_unit(q) for q, _ in history])
    targets = np.array([y for _, y in history])
    hyper = learn_hyperparams(inputs, targets, _INITIAL_HYPER)
    model = fit(inputs, targets, hyper)

    best = int(np.argmin(targets))
    incumbent_q, incumbent_cost = history[best][0], float(targets[best])
    stall_count = 0
    iterations = 0

    for iteration in range(1, config.max_iterations + 1):
        f_best = float(targets.min())
        u_next, _ = direct_optimize(
            lambda u: -expected_improvement(u, model, f_best), unit_box, config.acquisition_budget
        )
        q_next = box.from_unit(u_next)
        y = evaluate_cost(q_next, spec, config, scenario, eval_index=len(history))
        history.append((q_next, y))
        inputs = np.vstack([inputs, box.to_unit(q_next)])
        targets = np.append(targets, y)

        if iteration <= _REFIT_EVERY_ITERATION_UNTIL or iteration % _REFIT_CADENCE == 0:
            hyper = learn_hyperparams(inputs, targets, hyper)
        model = fit(inputs, targets, hyper)

        improvement = incumbent_cost - y
        if y < incumbent_cost:
            incumbent_q, incumbent_cost = q_next, y
        iterations = iteration
        if improvement < config.stall_tolerance:
            stall_count += 1
            if stall_count >= config.stall_iterations:
                break
        else:
            stall_count = 0

    return TuningSession(
        history=history,
        surrogate=model,
        incumbent_q=incumbent_q,
        incumbent_cost=incumbent_cost,
        iterations=iterations,
        config=config,
        spec=spec,
    )


def write_history_csv(session: TuningSession, path) -> None:
    """Evaluation history: iteration (0 for seed points), q1..qd, cost, incumbent_cost."""
    d = session.spec.d
    header = ["iteration"] + [f"q{j + 1}" for j in range(d)] + ["cost", "incumbent_cost"]
    rows = []
    running_best = math.inf
    for idx, (q, y) in enumerate(session.history):
        running_best = min(running_best, y)
        iteration = max(0, idx - session.config.n_seed + 1)
        rows.append([iteration, *q, y, running_best])
    write_csv(path, header, rows)
