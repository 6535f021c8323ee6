"""Filter-consistency statistics: NEES/NIS, chi-square bounds, and scalar tuning costs.

For a consistent filter the normalized estimation error squared (NEES)
e P^-1 e and the normalized innovation squared (NIS) e S^-1 e are chi-square
distributed with n_x and n_z degrees of freedom. Averaging over N Monte Carlo
runs, N * avg_stat is chi-square with N * dof degrees of freedom, which yields
two-sided hypothesis bounds at a given Type-I rate alpha.

The scalar cost of a tuning candidate is the absolute log-ratio of the
time-averaged statistic to its ideal value (the degrees of freedom), so a
perfectly consistent filter scores 0 and over/under-confidence of equal ratio
score equally.
"""

import math
from dataclasses import dataclass

import numpy as np

from .formatting import write_csv
from .kalman import GaussianBelief
from .linalg import quad_form_inv

# Degenerate evaluations (zero time-averaged statistic, failed covariance
# factorizations upstream) are reported at this cap so optimizer targets
# stay finite.
COST_CAP = 1e6

_QUANTILE_TOL = 1e-9


def nees(x_true: np.ndarray, belief: GaussianBelief) -> float:
    """eᵀ P⁻¹ e with e = x_true - belief.mean, via Cholesky solve."""
    e = np.asarray(x_true, dtype=float).reshape(-1) - belief.mean
    return quad_form_inv(belief.cov, e, "estimate covariance")


def nis(innovation: np.ndarray, s: np.ndarray) -> float:
    """eᵀ S⁻¹ e for an innovation e with covariance S."""
    e = np.asarray(innovation, dtype=float).reshape(-1)
    return quad_form_inv(np.atleast_2d(np.asarray(s, dtype=float)), e, "innovation covariance")


def average_stats(per_run_stats: np.ndarray) -> np.ndarray:
    """Elementwise mean over runs: (N, T) -> (T,)."""
    arr = np.asarray(per_run_stats, dtype=float)
    if arr.ndim != 2:
        raise ValueError("per-run statistics must form a rectangular N x T array")
    return arr.mean(axis=0)


def _lower_gamma_series(a: float, x: float) -> float:
    term = 1.0 / a
    total = term
    denom = a
    for _ in range(10000):
        denom += 1.0
        term *= x / denom
        total += term
        if abs(term) < abs(total) * 1e-16:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _upper_gamma_cf(a: float, x: float) -> float:
    # Modified Lentz evaluation of the continued fraction for Q(a, x).
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b if b != 0.0 else 1.0 / tiny
    h = d
    for i in range(1, 10000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def regularized_lower_gamma(a: float, x: float) -> float:
    """P(a, x), the regularized lower incomplete gamma function."""
    if a <= 0.0:
        raise ValueError("shape parameter must be positive")
    if x < 0.0:
        raise ValueError("argument must be nonnegative")
    if x == 0.0:
        return 0.0
    if x < a + 1.0:
        return _lower_gamma_series(a, x)
    return 1.0 - _upper_gamma_cf(a, x)


def chi2_cdf(x: float, dof: int) -> float:
    return regularized_lower_gamma(dof / 2.0, x / 2.0)


def chi2_inverse_cdf(p: float, dof: int) -> float:
    """Chi-square quantile by bisection on the series/continued-fraction CDF.

    Bisection is run to an absolute tolerance of 1e-9 on x, which is cheap for
    the degree-of-freedom range used here and trivially verifiable.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("probability must lie strictly inside (0, 1)")
    if dof < 1:
        raise ValueError("degrees of freedom must be a positive integer")
    lo = 0.0
    hi = dof + 10.0 * math.sqrt(2.0 * dof) + 10.0
    while chi2_cdf(hi, dof) < p:
        hi *= 2.0
    while hi - lo > _QUANTILE_TOL:
        mid = 0.5 * (lo + hi)
        if chi2_cdf(mid, dof) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def chi2_bounds(alpha: float, n_runs: int, dof: int) -> tuple[float, float]:
    """Two-sided bounds for the run-averaged statistic.

    Under consistency N * avg is chi-square with N * dof degrees of freedom,
    so the interval is [chi2inv(alpha/2, N dof)/N, chi2inv(1 - alpha/2, N dof)/N].
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly inside (0, 1)")
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    total_dof = n_runs * dof
    return (
        chi2_inverse_cdf(alpha / 2.0, total_dof) / n_runs,
        chi2_inverse_cdf(1.0 - alpha / 2.0, total_dof) / n_runs,
    )


def j_cost(avg_stats: np.ndarray, dof: int) -> float:
    """|log(time-averaged statistic / dof)|; capped at COST_CAP when the average is zero."""
    arr = np.asarray(avg_stats, dtype=float).reshape(-1)
    if arr.size == 0:
        raise ValueError("avg_stats must be nonempty")
    if dof < 1:
        raise ValueError("dof must be >= 1")
    if np.any(arr < 0.0):
        raise ValueError("averaged statistics must be nonnegative")
    total = float(arr.sum())
    if total <= 0.0:
        return COST_CAP
    return abs(math.log(total / (arr.size * dof)))


def fraction_in_bounds(values: np.ndarray, bounds: tuple[float, float]) -> float:
    v = np.asarray(values, dtype=float)
    return float(np.mean((v >= bounds[0]) & (v <= bounds[1])))


@dataclass(frozen=True)
class ConsistencyRecord:
    """Per-step averaged NEES/NIS with their chi-square bounds and scalar costs."""

    avg_nees: np.ndarray
    avg_nis: np.ndarray
    n_runs: int
    nx: int
    nz: int
    alpha: float
    bounds_nees: tuple[float, float]
    bounds_nis: tuple[float, float]
    j_nees: float
    j_nis: float


def build_record(
    nees_runs: np.ndarray,
    nis_runs: np.ndarray,
    nx: int,
    nz: int,
    alpha: float,
) -> ConsistencyRecord:
    """Aggregate per-run (N, T) NEES/NIS samples into a ConsistencyRecord."""
    avg_nees = average_stats(nees_runs)
    avg_nis = average_stats(nis_runs)
    n_runs = int(np.asarray(nees_runs).shape[0])
    return ConsistencyRecord(
        avg_nees=avg_nees,
        avg_nis=avg_nis,
        n_runs=n_runs,
        nx=nx,
        nz=nz,
        alpha=alpha,
        bounds_nees=chi2_bounds(alpha, n_runs, nx),
        bounds_nis=chi2_bounds(alpha, n_runs, nz),
        j_nees=j_cost(avg_nees, nx),
        j_nis=j_cost(avg_nis, nz),
    )


def record_to_csv(record: ConsistencyRecord, path) -> None:
    header = ["k", "avg_nees", "nees_lo", "nees_hi", "avg_nis", "nis_lo", "nis_hi"]
    nees_lo, nees_hi = record.bounds_nees
    nis_lo, nis_hi = record.bounds_nis
    rows = (
        [k + 1, record.avg_nees[k], nees_lo, nees_hi, record.avg_nis[k], nis_lo, nis_hi]
        for k in range(record.avg_nees.shape[0])
    )
    write_csv(path, header, rows)
