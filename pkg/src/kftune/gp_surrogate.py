"""Gaussian-process regression surrogate for the tuning cost surface.

The surrogate uses a Matern-3/2 kernel with a single shared length-scale, a
zero prior mean, and additive observation noise. Design points are expected in
unit-box coordinates (callers normalize), which is the only setting in which a
single shared length-scale is meaningful. Hyperparameters are learned by
minimizing the negative log marginal likelihood over a log-parameterized box
with the same DIRECT optimizer used for acquisition maximization.
"""

import math
from dataclasses import dataclass

import numpy as np

from .acquisition import SearchBox, direct_optimize
from .formatting import write_csv
from .linalg import NotPositiveDefiniteError, chol_solve, solve_lower

_SQRT3 = math.sqrt(3.0)
_JITTER_SCALE = 1e-10

# Natural-log bounds for (sigma0, ell, sigma_n2) during hyperparameter search.
_LOG_HYPER_BOX = SearchBox(lower=np.array([-6.0, -4.0, -10.0]), upper=np.array([6.0, 2.0, 2.0]))
_HYPER_BUDGET = 200


@dataclass(frozen=True)
class Hyperparams:
    """Kernel amplitude sigma0 (variance units), length-scale ell, noise variance sigma_n2."""

    sigma0: float
    ell: float
    sigma_n2: float

    def __post_init__(self):
        if not self.sigma0 > 0.0:
            raise ValueError("sigma0 must be positive")
        if not self.ell > 0.0:
            raise ValueError("ell must be positive")
        if self.sigma_n2 < 0.0:
            raise ValueError("sigma_n2 must be nonnegative")


def kernel(q1: np.ndarray, q2: np.ndarray, hyper: Hyperparams) -> float:
    """Matern-3/2: sigma0 (1 + sqrt(3) r / ell) exp(-sqrt(3) r / ell) with r = ||q1 - q2||."""
    r = float(np.linalg.norm(np.asarray(q1, dtype=float) - np.asarray(q2, dtype=float)))
    s = _SQRT3 * r / hyper.ell
    return hyper.sigma0 * (1.0 + s) * math.exp(-s)


def _as_design_matrix(inputs) -> np.ndarray:
    x = np.asarray(inputs, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError("inputs must form an (n, d) array")
    if x.size and (x.min() < -1e-9 or x.max() > 1.0 + 1e-9):
        raise ValueError("design inputs must be normalized to the unit box")
    return x


def _pairwise_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def _kernel_matrix(a: np.ndarray, b: np.ndarray, hyper: Hyperparams) -> np.ndarray:
    s = _SQRT3 * _pairwise_distances(a, b) / hyper.ell
    return hyper.sigma0 * (1.0 + s) * np.exp(-s)


@dataclass(frozen=True)
class SurrogateModel:
    """Immutable fitted GP: training set, hyperparameters, and cached factorization."""

    inputs: np.ndarray
    targets: np.ndarray
    hyper: Hyperparams
    chol: np.ndarray
    alpha: np.ndarray

    def predict(self, q_star: np.ndarray) -> tuple[float, float]:
        return predict(self, q_star)


def fit(inputs, targets, hyper: Hyperparams) -> SurrogateModel:
    """Factor the noisy Gram matrix and cache the target solve.

    A diagonal jitter of 1e-10 * sigma0 is always added; on a Cholesky failure
    it is escalated once by x100 before giving up. Duplicate inputs (closer
    than 1e-12) are rejected unless sigma_n2 > 0.
    """
    x = _as_design_matrix(inputs)
    y = np.asarray(targets, dtype=float).reshape(-1)
    n = x.shape[0]
    if n < 1:
        raise ValueError("at least one training point is required")
    if y.shape[0] != n:
        raise ValueError("inputs and targets must have matching lengths")

    dists = _pairwise_distances(x, x)
    if hyper.sigma_n2 == 0.0 and n > 1:
        off_diag = dists + np.diag(np.full(n, np.inf))
        if off_diag.min() < 1e-12:
            raise ValueError("duplicate design inputs require observation noise (sigma_n2 > 0)")

    gram = _kernel_matrix(x, x, hyper)
    jitter = _JITTER_SCALE * hyper.sigma0
    for attempt in range(2):
        try:
            chol = np.linalg.cholesky(gram + (hyper.sigma_n2 + jitter) * np.eye(n))
            break
        except np.linalg.LinAlgError:
            jitter *= 100.0
    else:
        raise NotPositiveDefiniteError(
            "Gram matrix is too ill-conditioned to factor even with escalated jitter"
        )
    alpha = chol_solve(chol, y)
    return SurrogateModel(inputs=x, targets=y, hyper=hyper, chol=chol, alpha=alpha)


def predict(model: SurrogateModel, q_star: np.ndarray) -> tuple[float, float]:
    """Posterior mean and (nonnegative) latent variance at q_star."""
    q = np.asarray(q_star, dtype=float).reshape(1, -1)
    if q.shape[1] != model.inputs.shape[1]:
        raise ValueError("query dimension does not match the training inputs")
    k_star = _kernel_matrix(q, model.inputs, model.hyper)[0]
    mu = float(k_star @ model.alpha)
    v = solve_lower(model.chol, k_star)
    var = model.hyper.sigma0 - float(v @ v)
    return mu, max(var, 0.0)


def negative_log_marginal_likelihood(inputs, targets, hyper: Hyperparams) -> float:
    """0.5 yᵀ (K + sigma_n2 I)⁻¹ y + 0.5 log det(K + sigma_n2 I) + (n/2) log 2pi."""
    model = fit(inputs, targets, hyper)
    n = model.targets.shape[0]
    quad = 0.5 * float(model.targets @ model.alpha)
    logdet = float(np.sum(np.log(np.diag(model.chol))))
    return quad + logdet + 0.5 * n * math.log(2.0 * math.pi)


def learn_hyperparams(inputs, targets, current: Hyperparams) -> Hyperparams:
    """Minimize the NLML over log-parameterized hyperparameters with DIRECT.

    The result is compared against `current` and the lower-NLML setting wins,
    so a refit can never make the model (in likelihood terms) worse. If every
    candidate fails to factor, `current` is kept.
    """
    x = _as_design_matrix(inputs)
    if x.shape[0] < 2:
        raise ValueError("hyperparameter learning requires at least two points")

    def objective(theta: np.ndarray) -> float:
        candidate = Hyperparams(
            sigma0=math.exp(theta[0]), ell=math.exp(theta[1]), sigma_n2=math.exp(theta[2])
        )
        try:
            return negative_log_marginal_likelihood(x, targets, candidate)
        except NotPositiveDefiniteError:
            return math.inf

    best_theta, best_nlml = direct_optimize(objective, _LOG_HYPER_BOX, budget=_HYPER_BUDGET)
    try:
        current_nlml = negative_log_marginal_likelihood(x, targets, current)
    except NotPositiveDefiniteError:
        current_nlml = math.inf
    if best_nlml < current_nlml:
        return Hyperparams(
            sigma0=math.exp(best_theta[0]),
            ell=math.exp(best_theta[1]),
            sigma_n2=math.exp(best_theta[2]),
        )
    return current


def grid_predictions(
    model: SurrogateModel, box: SearchBox, points_per_dim: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Surrogate mean and standard deviation over a regular lattice in box coordinates."""
    axes = [np.linspace(box.lower[j], box.upper[j], points_per_dim) for j in range(box.d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.reshape(-1) for m in mesh], axis=-1)
    mu = np.empty(points.shape[0])
    sigma = np.empty(points.shape[0])
    for i, q in enumerate(points):
        m, v = predict(model, box.to_unit(q))
        mu[i] = m
        sigma[i] = math.sqrt(v)
    return points, mu, sigma


def export_grid(model: SurrogateModel, box: SearchBox, path, points_per_dim: int = 101) -> None:
    """CSV lattice export with columns q1..qd, mu, sigma."""
    points, mu, sigma = grid_predictions(model, box, points_per_dim)
    header = [f"q{j + 1}" for j in range(box.d)] + ["mu", "sigma"]
    rows = ([*points[i], mu[i], sigma[i]] for i in range(points.shape[0]))
    write_csv(path, header, rows)
