"""Constant-modulus factorization problem, phase parametrization and objectives.

The free variable is the real phase matrix ``Phi`` of shape ``(N_t - 1, N_rf)``.
The analog precoder is ``F_RF = exp(1j * [0; Phi]) / sqrt(N_t)``: its first
row is pinned to zero phase, which removes the rank-one shift invariance of
the objective. For a fixed ``F_RF`` the optimal digital precoder is the least
squares solution ``F_BB = F_RF^+ F_opt``, leaving

    phi(Phi) = ||F_opt||_F^2 - ||Q_RF^H F_opt||_F^2

where ``F_RF = Q_RF R_RF`` is a thin QR decomposition.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack, solve_triangular

from ._validation import check_matrix, check_positive_int, check_rf_dims
from .exceptions import DimensionError, IllConditionedAnalogError

COND_THRESHOLD = 1e12


@dataclass(frozen=True)
class FactorizationProblem:
    """Target precoder ``F_opt`` (N_t x N_s) to be realized with ``N_rf`` RF chains."""

    F_opt: np.ndarray
    N_rf: int

    def __post_init__(self):
        F = check_matrix(self.F_opt, "F_opt")
        object.__setattr__(self, "F_opt", F)
        n_rf = check_positive_int(self.N_rf, "N_rf")
        object.__setattr__(self, "N_rf", n_rf)
        check_rf_dims(F.shape[0], F.shape[1], n_rf)

    @property
    def N_t(self):
        return self.F_opt.shape[0]

    @property
    def N_s(self):
        return self.F_opt.shape[1]

    @property
    def P(self):
        """Power budget implied by the target, ``||F_opt||_F^2``."""
        return float(np.vdot(self.F_opt, self.F_opt).real)


@dataclass(frozen=True)
class HybridPrecoder:
    """Analog/digital precoder pair ``(F_RF, F_BB)``."""

    F_RF: np.ndarray
    F_BB: np.ndarray

    @property
    def F(self):
        """Effective precoder ``F_RF @ F_BB``."""
        return self.F_RF @ self.F_BB

    @property
    def power(self):
        """Transmit power ``tr(F_BB^H F_RF^H F_RF F_BB)``."""
        F = self.F
        return float(np.vdot(F, F).real)

    def residual(self, F_opt):
        """Squared Frobenius error ``||F_opt - F_RF F_BB||_F^2``."""
        E = np.asarray(F_opt) - self.F
        return float(np.vdot(E, E).real)

    def is_constant_modulus(self, atol=1e-12):
        n_t = self.F_RF.shape[0]
        return bool(np.all(np.abs(np.abs(self.F_RF) - 1 / np.sqrt(n_t)) <= atol))

    def normalized(self, P):
        """Copy with ``F_BB`` rescaled so that ``||F_RF F_BB||_F^2 == P``."""
        pw = self.power
        if pw == 0:
            return self
        return HybridPrecoder(self.F_RF, self.F_BB * np.sqrt(P / pw))


def _target(problem_or_F):
    if isinstance(problem_or_F, FactorizationProblem):
        return problem_or_F.F_opt
    return check_matrix(problem_or_F, "F_opt")


def pad_phases(Phi):
    """``Phi`` with a zero first row prepended, i.e. the full phase matrix ``Phi_RF``."""
    Phi = np.asarray(Phi, dtype=float)
    return np.vstack([np.zeros((1, Phi.shape[1])), Phi])


def phases_to_analog(Phi, N_t=None):
    """Map reduced phases to the constant-modulus analog precoder.

    Parameters
    ----------
    Phi : ndarray, shape (N_t - 1, N_rf)
    N_t : int, optional
        If given, the row count of ``Phi`` is checked against it.
    """
    Phi = check_matrix(Phi, "Phi", dtype=float, allow_empty=True)
    if N_t is not None and Phi.shape[0] != N_t - 1:
        raise DimensionError(f"Phi must have N_t-1={N_t - 1} rows, got {Phi.shape[0]}")
    n_t = Phi.shape[0] + 1
    return np.exp(1j * pad_phases(Phi)) / np.sqrt(n_t)


def analog_to_phases(F_RF):
    """Inverse of :func:`phases_to_analog` up to per-column phase and ``2*pi``.

    Row 1 phases are subtracted from every row; the zero entry convention
    ``angle(0) == 0`` applies.
    """
    ang = np.angle(np.asarray(F_RF))
    return ang[1:, :] - ang[:1, :]


def qr_analog(F_RF, cond_threshold=COND_THRESHOLD):
    """Thin Householder QR of ``F_RF`` with a conditioning guard on ``R``.

    The guard uses LAPACK's 1-norm condition estimate of the triangular factor.
    """
    Q, R = _qr_raw(F_RF, cond_threshold)
    return Q, np.triu(R)


def _qr_raw(F_RF, cond_threshold):
    # R is returned with Householder data below the diagonal; callers read the upper triangle only.
    qr, tau, _, info = lapack.zgeqrf(F_RF)
    n = F_RF.shape[1]
    R = qr[:n, :]
    rcond, _ = lapack.ztrcon(R, norm="1", uplo="U", diag="N")
    if not rcond * cond_threshold > 1.0:
        cond = 1.0 / rcond if rcond > 0 else np.inf
        raise IllConditionedAnalogError(float(cond), cond_threshold)
    Q, _, _ = lapack.zungqr(qr, tau)
    return Q, R


def _analog_fast(Phi, n_t):
    F_RF = np.empty((n_t, Phi.shape[1]), dtype=complex)
    F_RF[0, :] = 1.0
    np.cos(Phi, out=F_RF.real[1:])
    np.sin(Phi, out=F_RF.imag[1:])
    F_RF *= 1.0 / np.sqrt(n_t)
    return F_RF


def _objective(Phi, F_opt, F_norm2, cond_threshold=COND_THRESHOLD):
    Q, _ = _qr_raw(_analog_fast(Phi, F_opt.shape[0]), cond_threshold)
    proj = Q.conj().T @ F_opt
    return max(F_norm2 - float(np.vdot(proj, proj).real), 0.0)


def digital_from_analog(F_RF, F_opt, cond_threshold=COND_THRESHOLD):
    """Least-squares digital precoder ``F_BB = (F_RF^H F_RF)^{-1} F_RF^H F_opt`` via QR."""
    F_RF = check_matrix(F_RF, "F_RF")
    F_opt = _target(F_opt)
    if F_RF.shape[0] != F_opt.shape[0]:
        raise DimensionError(
            f"F_RF has {F_RF.shape[0]} rows but F_opt has {F_opt.shape[0]}"
        )
    Q, R = qr_analog(F_RF, cond_threshold)
    return solve_triangular(R, Q.conj().T @ F_opt)


def objective_qr(Phi, problem, cond_threshold=COND_THRESHOLD):
    """Eliminated objective ``phi(Phi)`` evaluated through the QR factor ``Q_RF``."""
    F_opt = _target(problem)
    Phi = check_matrix(Phi, "Phi", dtype=float, allow_empty=True)
    if Phi.shape[0] != F_opt.shape[0] - 1:
        raise DimensionError(f"Phi must have N_t-1={F_opt.shape[0] - 1} rows, got {Phi.shape[0]}")
    return _objective(Phi, F_opt, float(np.vdot(F_opt, F_opt).real), cond_threshold)


def residual_direct(F_RF, F_opt, cond_threshold=COND_THRESHOLD):
    """Reference objective ``||F_opt - F_RF F_RF^+ F_opt||_F^2`` via an SVD pseudoinverse."""
    F_RF = check_matrix(F_RF, "F_RF")
    F_opt = _target(F_opt)
    s = np.linalg.svd(F_RF, compute_uv=False)
    cond = s[0] / s[-1] if s[-1] > 0 else np.inf
    if cond > cond_threshold:
        raise IllConditionedAnalogError(float(cond), cond_threshold)
    E = F_opt - F_RF @ (np.linalg.pinv(F_RF) @ F_opt)
    return max(float(np.vdot(E, E).real), 0.0)
