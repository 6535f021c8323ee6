"""Linear Kalman filter: predict/update recursion on Gaussian beliefs.

The innovation is the standard e = z - H x_pred, and every covariance solve
goes through a Cholesky factor; a factorization failure raises
NotPositiveDefiniteError instead of being papered over, because a non-PD
innovation covariance means the filter design itself is degenerate.
"""

from dataclasses import dataclass

import numpy as np

from .linalg import chol_solve, cholesky_pd, symmetrize
from .lti_model import DiscreteModel


@dataclass(frozen=True)
class GaussianBelief:
    """State estimate as a Gaussian: mean (n,) and symmetric PD covariance (n, n)."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float).reshape(-1))
        object.__setattr__(self, "cov", np.atleast_2d(np.asarray(self.cov, dtype=float)))
        n = self.mean.shape[0]
        if self.cov.shape != (n, n):
            raise ValueError("covariance shape must match the mean dimension")


@dataclass(frozen=True)
class UpdateResult:
    """Posterior belief plus the innovation e and its covariance S."""

    belief: GaussianBelief
    innovation: np.ndarray
    innovation_cov: np.ndarray


def predict(prior: GaussianBelief, dm: DiscreteModel, u: np.ndarray) -> GaussianBelief:
    """Propagate the belief through the dynamics: mean = F x + B u, cov = F P Fᵀ + Q."""
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.shape[0] != dm.B.shape[1]:
        raise ValueError("control dimension does not match B")
    if prior.mean.shape[0] != dm.n_states:
        raise ValueError("state dimension does not match the model")
    mean = dm.F @ prior.mean + dm.B @ u
    cov = symmetrize(dm.F @ prior.cov @ dm.F.T + dm.Q)
    return GaussianBelief(mean=mean, cov=cov)


def update(pred: GaussianBelief, dm: DiscreteModel, z: np.ndarray) -> UpdateResult:
    """Condition the predicted belief on measurement z.

    S = H P Hᵀ + R, K = P Hᵀ S⁻¹ (via Cholesky solve), e = z - H x,
    mean = x + K e, cov = P - K S Kᵀ (symmetrized).
    """
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.shape[0] != dm.n_measurements:
        raise ValueError("measurement dimension does not match H")
    s = symmetrize(dm.H @ pred.cov @ dm.H.T + dm.R)
    chol_s = cholesky_pd(s, "innovation covariance")
    gain = chol_solve(chol_s, dm.H @ pred.cov).T
    innovation = z - dm.H @ pred.mean
    mean = pred.mean + gain @ innovation
    cov = symmetrize(pred.cov - gain @ s @ gain.T)
    return UpdateResult(belief=GaussianBelief(mean=mean, cov=cov), innovation=innovation, innovation_cov=s)
