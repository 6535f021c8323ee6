"""Continuous-time LTI state-space models and their discrete-time counterparts.

Discretization follows the usual recipe for sampled-data systems: a zero-order
hold on the dynamics and input,

    F = e^(A dt),   B = (integral_0^dt e^(A tau) dtau) G,

the matrix-exponential (Van Loan) construction for the process-noise covariance
Q from the continuous intensity V, and R = W/dt for the measurement noise.
"""

from dataclasses import dataclass

import numpy as np

from .linalg import NotPositiveDefiniteError, symmetrize

# Eigenvalues above -PSD_TOL * trace are treated as zero when checking PSD-ness;
# noise at the V -> 0 boundary otherwise trips the check.
PSD_TOL = 1e-12


def _check_psd(m: np.ndarray, name: str) -> None:
    if not np.allclose(m, m.T, atol=1e-10):
        raise ValueError(f"{name} must be symmetric")
    if m.size:
        eigs = np.linalg.eigvalsh(symmetrize(m))
        floor = -PSD_TOL * max(float(np.trace(m)), 1.0)
        if eigs.min() < floor:
            raise NotPositiveDefiniteError(f"{name} must be positive semidefinite")


def _check_pd(m: np.ndarray, name: str) -> None:
    _check_psd(m, name)
    if np.linalg.eigvalsh(symmetrize(m)).min() <= 0.0:
        raise NotPositiveDefiniteError(f"{name} must be positive definite")


@dataclass(frozen=True)
class ContinuousModel:
    """Continuous-time LTI model dx/dt = A x + G u + Gamma v, z = H x + w.

    V is the process-noise intensity ((units)^2/s, symmetric PSD) driving v,
    W the measurement-noise intensity ((units)^2*s, symmetric PD) driving w,
    and dt the sampling period used for discretization.
    """

    A: np.ndarray
    G: np.ndarray
    Gamma: np.ndarray
    H: np.ndarray
    V: np.ndarray
    W: np.ndarray
    dt: float

    def __post_init__(self):
        for name in ("A", "G", "Gamma", "H", "V", "W"):
            object.__setattr__(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))
        object.__setattr__(self, "dt", float(self.dt))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError("A must be square")
        if self.G.shape[0] != n or self.Gamma.shape[0] != n:
            raise ValueError("G and Gamma must have one row per state")
        if self.H.shape[1] != n:
            raise ValueError("H must have one column per state")
        w = self.Gamma.shape[1]
        p = self.H.shape[0]
        if self.V.shape != (w, w):
            raise ValueError("V must be square with one row per noise input")
        if self.W.shape != (p, p):
            raise ValueError("W must be square with one row per measurement")
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        _check_psd(self.V, "V")
        _check_pd(self.W, "W")

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_measurements(self) -> int:
        return self.H.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.G.shape[1]


@dataclass(frozen=True)
class DiscreteModel:
    """Discrete-time model x_k = F x_{k-1} + B u_k + v_k, z_k = H x_k + w_k.

    v_k ~ N(0, Q) and w_k ~ N(0, R); Q is symmetrized on construction so that
    downstream Cholesky factorizations never see floating-point asymmetry.
    """

    F: np.ndarray
    B: np.ndarray
    H: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    dt: float

    def __post_init__(self):
        for name in ("F", "B", "H", "Q", "R"):
            object.__setattr__(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))
        object.__setattr__(self, "Q", symmetrize(self.Q))
        object.__setattr__(self, "dt", float(self.dt))
        n = self.F.shape[0]
        if self.F.shape != (n, n) or self.B.shape[0] != n or self.H.shape[1] != n:
            raise ValueError("inconsistent state dimensions")
        if self.Q.shape != (n, n):
            raise ValueError("Q must be n x n")
        p = self.H.shape[0]
        if self.R.shape != (p, p):
            raise ValueError("R must be p x p")
        _check_psd(self.Q, "Q")
        _check_pd(self.R, "R")

    @property
    def n_states(self) -> int:
        return self.F.shape[0]

    @property
    def n_measurements(self) -> int:
        return self.H.shape[0]


def matrix_exponential(m: np.ndarray) -> np.ndarray:
    """e^M by scaling-and-squaring with a Taylor series run to convergence.

    The matrices handled here are tiny (n <= 4 state blocks, doubled for the
    Van Loan stack), so a plain series after scaling ||M/2^s|| below 1/2 is
    both simple and accurate (relative error well under 1e-10 for ||M|| <= 10).
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("matrix_exponential requires a square matrix")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix_exponential requires finite entries")
    n = m.shape[0]
    norm = float(np.linalg.norm(m, np.inf))
    s = max(0, int(np.ceil(np.log2(norm / 0.5)))) if norm > 0.5 else 0
    a = m / (2.0 ** s)
    result = np.eye(n)
    term = np.eye(n)
    for k in range(1, 60):
        term = term @ a / k
        result = result + term
        if float(np.linalg.norm(term, np.inf)) <= 1e-18 * max(float(np.linalg.norm(result, np.inf)), 1.0):
            break
    for _ in range(s):
        result = result @ result
    return result


def zoh_discretize(cm: ContinuousModel) -> tuple[np.ndarray, np.ndarray]:
    """Zero-order-hold (F, B) from the augmented exponential exp([[A, G], [0, 0]] dt)."""
    n = cm.n_states
    m = cm.n_inputs
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = cm.A
    aug[:n, n:] = cm.G
    phi = matrix_exponential(aug * cm.dt)
    return phi[:n, :n], phi[:n, n:]


def van_loan_q(a: np.ndarray, gamma: np.ndarray, v: np.ndarray, dt: float) -> np.ndarray:
    """Discrete process-noise covariance Q from continuous intensity V.

    Stacks M = [[-A, Gamma V Gammaᵀ], [0, Aᵀ]] dt, takes Phi = e^M, and returns
    Q = Phi22ᵀ Phi12, symmetrized and with sub-roundoff negative eigenvalues
    clamped to zero.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    gamma = np.atleast_2d(np.asarray(gamma, dtype=float))
    v = np.atleast_2d(np.asarray(v, dtype=float))
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    n = a.shape[0]
    if a.shape != (n, n) or gamma.shape[0] != n:
        raise ValueError("dimension mismatch between A and Gamma")
    if v.shape != (gamma.shape[1], gamma.shape[1]):
        raise ValueError("V must match the noise-input dimension")
    _check_psd(v, "V")

    stack = np.zeros((2 * n, 2 * n))
    stack[:n, :n] = -a
    stack[:n, n:] = gamma @ v @ gamma.T
    stack[n:, n:] = a.T
    phi = matrix_exponential(stack * dt)
    q = symmetrize(phi[n:, n:].T @ phi[:n, n:])

    eigs, vecs = np.linalg.eigh(q)
    floor = -PSD_TOL * max(float(np.trace(q)), 1.0)
    if eigs.min() < floor:
        raise NotPositiveDefiniteError("Van Loan construction produced a non-PSD Q")
    if eigs.min() < 0.0:
        q = symmetrize((vecs * np.maximum(eigs, 0.0)) @ vecs.T)
    return q


def discretize_r(w: np.ndarray, dt: float) -> np.ndarray:
    """Discrete measurement-noise covariance R = W/dt."""
    w = np.atleast_2d(np.asarray(w, dtype=float))
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    _check_pd(w, "W")
    return w / dt


def discretize(cm: ContinuousModel) -> DiscreteModel:
    """Full discretization of a continuous model into a DiscreteModel."""
    f, b = zoh_discretize(cm)
    q = van_loan_q(cm.A, cm.Gamma, cm.V, cm.dt)
    r = discretize_r(cm.W, cm.dt)
    return DiscreteModel(F=f, B=b, H=cm.H, Q=q, R=r, dt=cm.dt)
