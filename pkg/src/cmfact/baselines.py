"""Gaussian-input benchmarks: waterfilling precoder and log-det mutual information."""

from dataclasses import dataclass

import numpy as np

from ._linalg import svd_canonical
from ._validation import check_matrix, check_positive_int
from .exceptions import DegenerateChannelError, DimensionError, InvalidCovarianceError


@dataclass(frozen=True)
class WaterfillingSolution:
    F_opt: np.ndarray
    powers: np.ndarray
    mu: float
    singular_values: np.ndarray


def waterfill_powers(gains, P, sigma2):
    """Exact active-set waterfilling over parallel channels.

    Parameters
    ----------
    gains : array_like
        Channel power gains ``lambda_i**2`` (any order, zeros allowed).
    P : float
        Total power.
    sigma2 : float
        Noise variance.

    Returns
    -------
    powers : ndarray
        ``max(mu - sigma2/gain, 0)`` in the input order, summing to ``P``.
    mu : float
        Water level (``nan`` when no channel has positive gain).
    """
    gains = np.asarray(gains, dtype=float)
    powers = np.zeros_like(gains)
    pos = np.flatnonzero(gains > 0)
    if pos.size == 0 or P <= 0:
        return powers, float("nan")
    order = pos[np.argsort(-gains[pos], kind="stable")]
    floors = sigma2 / gains[order]
    csum = np.cumsum(floors)
    k = np.arange(1, order.size + 1)
    mus = (P + csum) / k
    # largest active set whose weakest mode still sits below the water level
    n_active = int(np.flatnonzero(mus > floors)[-1]) + 1
    mu = float(mus[n_active - 1])
    powers[order[:n_active]] = mu - floors[:n_active]
    return powers, mu


def right_singular_basis(H, N_rf):
    """First ``N_rf`` right singular vectors of ``H`` (phase-canonical, semi-unitary)."""
    H = check_matrix(H, "H")
    N_rf = check_positive_int(N_rf, "N_rf")
    if N_rf > H.shape[1]:
        raise DimensionError(f"N_rf={N_rf} exceeds N_t={H.shape[1]}")
    _, _, V = svd_canonical(H, side="right")
    return V[:, :N_rf]


def waterfilling(H, P, sigma2, N_s):
    """Gaussian-input optimal precoder ``V_H[:, :N_s] diag(sqrt(p))``.

    Modes beyond the rank of ``H`` (or beyond ``min(N_r, N_t)``) receive
    zero power.
    """
    H = check_matrix(H, "H")
    N_s = check_positive_int(N_s, "N_s")
    if N_s > H.shape[1]:
        raise DimensionError(f"N_s={N_s} exceeds N_t={H.shape[1]}")
    if not np.any(H):
        raise DegenerateChannelError("channel matrix is zero")
    _, s, V = svd_canonical(H, side="right")
    lam = np.zeros(N_s)
    k = min(N_s, s.size)
    lam[:k] = s[:k]
    gains = np.where(lam > 1e-10 * s[0], lam ** 2, 0.0)
    powers, mu = waterfill_powers(gains, P, sigma2)
    F_opt = V[:, :N_s] * np.sqrt(powers)[None, :]
    return WaterfillingSolution(F_opt, powers, mu, s)


def gaussian_mi(H, Q, sigma2, psd_tol=1e-9):
    """``log2 det(I + H Q H^H / sigma2)`` in bits."""
    H = check_matrix(H, "H")
    Q = check_matrix(Q, "Q")
    if Q.shape != (H.shape[1], H.shape[1]):
        raise DimensionError(f"Q must be {H.shape[1]}x{H.shape[1]}, got {Q.shape}")
    Qh = (Q + Q.conj().T) / 2
    if np.max(np.abs(Q - Qh)) > psd_tol * max(1.0, np.max(np.abs(Q))):
        raise InvalidCovarianceError("Q is not Hermitian")
    lam_min = np.linalg.eigvalsh(Qh)[0]
    if lam_min < -psd_tol * max(1.0, np.max(np.abs(Q))):
        raise InvalidCovarianceError(f"Q has negative eigenvalue {lam_min:.3e}")
    A = np.eye(H.shape[0]) + H @ Qh @ H.conj().T / sigma2
    sign, logdet = np.linalg.slogdet(A)
    return max(float(logdet / np.log(2)), 0.0)


def gaussian_mi_precoder(H, F, sigma2):
    """:func:`gaussian_mi` with covariance ``F F^H``, evaluated in the smaller dimension."""
    HF = np.asarray(H) @ np.asarray(F)
    G = HF.conj().T @ HF / sigma2
    sign, logdet = np.linalg.slogdet(np.eye(G.shape[0]) + G)
    return max(float(logdet / np.log(2)), 0.0)
