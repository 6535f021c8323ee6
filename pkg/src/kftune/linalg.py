"""Small shared dense linear-algebra helpers used across the package."""

import numpy as np
from scipy.linalg import cho_solve, solve_triangular


class NotPositiveDefiniteError(ValueError):
    """A matrix that must be positive definite failed its Cholesky factorization."""


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Return (M + Mᵀ)/2, killing floating-point asymmetry."""
    return 0.5 * (m + m.T)


def cholesky_pd(m: np.ndarray, what: str = "matrix") -> np.ndarray:
    """Lower Cholesky factor of a PD matrix; raises NotPositiveDefiniteError otherwise."""
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"{what} is not positive definite") from exc


def chol_solve(lower: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve (L Lᵀ) x = b given a lower Cholesky factor, without forming an inverse."""
    return cho_solve((lower, True), b, check_finite=False)


def solve_lower(lower: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Forward-substitution solve L y = b for lower-triangular L."""
    return solve_triangular(lower, b, lower=True, check_finite=False)


def quad_form_inv(m: np.ndarray, e: np.ndarray, what: str = "matrix") -> float:
    """Compute eᵀ M⁻¹ e for PD M via its Cholesky factor."""
    y = solve_lower(cholesky_pd(m, what), e)
    return float(y @ y)
