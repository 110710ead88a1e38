"""Closed-form derivatives of the factorization objective and finite-difference oracles.

Notation: ``f(F_RF) = ||F_opt - F_RF F_RF^+ F_opt||_F^2`` is the objective in
the analog precoder, ``psi(Phi_RF) = f(exp(1j*Phi_RF)/sqrt(N_t))`` the same
objective over the full ``N_t x N_rf`` phase matrix, and ``phi(Phi)`` its
restriction to phase matrices whose first row is zero. All ``vec`` operations
are column-major (Fortran order).

The complex gradient follows the convention ``grad_f = df/dF_RF^*``; the two
Hessian blocks are defined through

    vec(d grad_f) = H_f_fstar @ vec(dF) + H_fstar_fstar @ vec(dF^*).
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from ._validation import check_matrix
from .exceptions import DimensionError, HessianTooLargeError
from .factorization import COND_THRESHOLD, _analog_fast, _qr_raw, pad_phases, qr_analog

HESSIAN_CAP = 4096
FD_STEP = 1e-5


def vec(A):
    return np.asarray(A).reshape(-1, order="F")


def unvec(v, shape):
    return np.asarray(v).reshape(shape, order="F")


def _commutation_index(m, n):
    """Row/column index pairs of the nonzeros of the commutation matrix ``K_{m,n}``."""
    i, j = np.meshgrid(np.arange(m), np.arange(n), indexing="ij")
    return (j + n * i).ravel(), (i + m * j).ravel()


def commutation_matrix(m, n):
    """Permutation ``K`` of size ``mn x mn`` with ``K @ vec(A) == vec(A.T)`` for ``A`` m x n."""
    if m < 1 or n < 1:
        raise DimensionError(f"commutation matrix needs m, n >= 1, got ({m}, {n})")
    rows, cols = _commutation_index(m, n)
    K = np.zeros((m * n, m * n))
    K[rows, cols] = 1.0
    return K


def _right_commute(A, m, n):
    """``A @ K_{m,n}`` as a column gather."""
    rows, cols = _commutation_index(m, n)
    perm = np.empty(m * n, dtype=int)
    perm[cols] = rows
    return A[:, perm]


@dataclass(frozen=True)
class ComplexHessianBlocks:
    """The two independent blocks of the complex Hessian of ``f``.

    The remaining blocks follow by conjugation:
    ``H_fstar_f = conj(H_f_fstar)`` and ``H_f_f = conj(H_fstar_fstar)``.
    """

    H_f_fstar: np.ndarray
    H_fstar_fstar: np.ndarray

    def full(self):
        """The ``2 x 2`` block complex Hessian."""
        return np.block(
            [
                [self.H_f_fstar, self.H_fstar_fstar],
                [self.H_fstar_fstar.conj(), self.H_f_fstar.conj()],
            ]
        )


def _pinv_parts(F_RF, F_opt, cond_threshold):
    """Return ``(F^+, (F^H F)^{-1}, Z1, Z2)`` computed from explicit normal equations."""
    qr_analog(F_RF, cond_threshold)  # conditioning guard only
    gram_inv = np.linalg.inv(F_RF.conj().T @ F_RF)
    pinv = gram_inv @ F_RF.conj().T
    Z1 = np.eye(F_RF.shape[0]) - F_RF @ pinv
    Z2 = pinv @ F_opt
    return pinv, gram_inv, Z1, Z2


def grad_f(F_RF, F_opt, cond_threshold=COND_THRESHOLD):
    """Complex gradient ``-Z1 F_opt Z2^H`` of ``f`` with respect to ``F_RF^*``."""
    F_RF = check_matrix(F_RF, "F_RF")
    F_opt = check_matrix(F_opt, "F_opt")
    _, _, Z1, Z2 = _pinv_parts(F_RF, F_opt, cond_threshold)
    return -Z1 @ F_opt @ Z2.conj().T


def _check_cap(dim, cap):
    if cap is not None and dim > cap:
        raise HessianTooLargeError(dim, cap)


def hessian_blocks_f(F_RF, F_opt, form="expanded", cap=HESSIAN_CAP,
                     cond_threshold=COND_THRESHOLD):
    """Complex Hessian blocks of ``f`` at ``F_RF``.

    Parameters
    ----------
    form : {"expanded", "symmetrized"}
        Two algebraically equal expressions of the ``H_fstar_fstar`` block:
        ``[W^T (x) P^H] K + [P^* (x) W] K`` ("expanded") and
        ``[W^T (x) P^H] K + K^T [W^T (x) P^H]^T`` ("symmetrized"), with
        ``W = Z1 F_opt Z2^H`` and ``P = F_RF^+``.
    cap : int or None
        Maximum allowed ``N_t * N_rf``.
    """
    F_RF = check_matrix(F_RF, "F_RF")
    F_opt = check_matrix(F_opt, "F_opt")
    n_t, n_rf = F_RF.shape
    _check_cap(n_t * n_rf, cap)
    pinv, gram_inv, Z1, Z2 = _pinv_parts(F_RF, F_opt, cond_threshold)
    Z1F = Z1 @ F_opt
    W = Z1F @ Z2.conj().T
    H1 = np.kron((Z2 @ Z2.conj().T).T, Z1) - np.kron(gram_inv.T, Z1F @ Z1F.conj().T)
    AK = _right_commute(np.kron(W.T, pinv.conj().T), n_t, n_rf)
    if form == "expanded":
        H2 = AK + _right_commute(np.kron(pinv.conj(), W), n_t, n_rf)
    elif form == "symmetrized":
        # K^T A^T == (A K)^T
        H2 = AK + AK.T
    else:
        raise ValueError(f"unknown form {form!r}")
    return ComplexHessianBlocks(H1, H2)


def _analog(Phi_RF):
    Phi_RF = check_matrix(Phi_RF, "Phi_RF", dtype=float)
    return np.exp(1j * Phi_RF) / np.sqrt(Phi_RF.shape[0])


def grad_psi(Phi_RF, F_opt, cond_threshold=COND_THRESHOLD):
    """Real gradient ``2 Im[grad_f o F_RF^*]`` of ``psi`` (reference path)."""
    F_RF = _analog(Phi_RF)
    G = grad_f(F_RF, F_opt, cond_threshold) * F_RF.conj()
    return 2 * G.imag


def hess_psi(Phi_RF, F_opt, cap=HESSIAN_CAP, cond_threshold=COND_THRESHOLD):
    """Real Hessian ``2 Re[M] - 2 diag(vec Re[G])`` of ``psi``, shape ``(N_t N_rf)^2``."""
    F_RF = _analog(Phi_RF)
    blocks = hessian_blocks_f(F_RF, F_opt, cap=cap, cond_threshold=cond_threshold)
    G = grad_f(F_RF, F_opt, cond_threshold) * F_RF.conj()
    fv = vec(F_RF)
    M = (blocks.H_f_fstar * np.outer(fv.conj(), fv)
         - blocks.H_fstar_fstar * np.outer(fv.conj(), fv.conj()))
    H = 2 * M.real - 2 * np.diag(vec(G.real))
    return (H + H.T) / 2


def reduce_grad_to_phi(grad):
    """Gradient of ``phi``: drop the pinned first row of the ``psi`` gradient."""
    grad = np.asarray(grad)
    if grad.ndim != 2 or grad.shape[0] < 2:
        raise DimensionError(f"expected an N_t x N_rf gradient, got shape {grad.shape}")
    return grad[1:, :]


def reduce_hess_to_phi(hess, N_t):
    """Hessian of ``phi``: drop rows/columns ``N_t*l`` (0-based) for every column ``l``."""
    hess = np.asarray(hess)
    n = hess.shape[0]
    if hess.ndim != 2 or hess.shape[1] != n or N_t < 2 or n % N_t:
        raise DimensionError(f"Hessian shape {hess.shape} incompatible with N_t={N_t}")
    keep = np.setdiff1d(np.arange(n), np.arange(0, n, N_t))
    return hess[np.ix_(keep, keep)]


def grad_psi_qr(Phi_RF, F_opt, cond_threshold=COND_THRESHOLD):
    """Fast gradient of ``psi`` from the QR factors of ``F_RF``."""
    F_RF = _analog(Phi_RF)
    F_opt = np.asarray(F_opt)
    return _grad_psi_from_qr(F_RF, F_opt, *qr_analog(F_RF, cond_threshold))


def _grad_psi_from_qr(F_RF, F_opt, Q, R):
    Z = Q.conj().T @ F_opt
    # (Q Z - F_opt) Z^H R^{-H} = ((R^{-1} Z) (Q Z - F_opt)^H)^H
    RZ, _ = lapack.ztrtrs(R, Z, lower=0)
    T = RZ @ (Q @ Z - F_opt).conj().T
    return 2 * (T.conj().T * F_RF.conj()).imag


def value_and_grad_phi(Phi, F_opt, cond_threshold=COND_THRESHOLD):
    """``(phi(Phi), grad phi(Phi))`` sharing one QR decomposition."""
    F_opt = np.asarray(F_opt)
    F_RF = _analog_fast(np.asarray(Phi, dtype=float), F_opt.shape[0])
    Q, R = _qr_raw(F_RF, cond_threshold)
    proj = Q.conj().T @ F_opt
    val = max(float(np.vdot(F_opt, F_opt).real - np.vdot(proj, proj).real), 0.0)
    return val, _grad_psi_from_qr(F_RF, F_opt, Q, R)[1:, :]


def grad_phi(Phi, F_opt, cond_threshold=COND_THRESHOLD):
    return value_and_grad_phi(Phi, F_opt, cond_threshold)[1]


def hess_phi(Phi, F_opt, cap=HESSIAN_CAP, cond_threshold=COND_THRESHOLD):
    Phi_RF = pad_phases(Phi)
    return reduce_hess_to_phi(hess_psi(Phi_RF, F_opt, cap, cond_threshold), Phi_RF.shape[0])


# -- finite-difference oracles ---------------------------------------------


def fd_gradient(fun, x, step=FD_STEP):
    """Central-difference gradient of a real scalar function of a real array."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[idx] = step
        g[idx] = (fun(x + e) - fun(x - e)) / (2 * step)
    return g


def fd_jacobian_vec(fun, x, step=FD_STEP):
    """Central-difference Jacobian of ``vec(fun(x))`` w.r.t. ``vec(x)`` (column-major)."""
    x = np.asarray(x, dtype=float)
    xv = vec(x)
    cols = []
    for p in range(xv.size):
        e = np.zeros_like(xv)
        e[p] = step
        fp = vec(fun(unvec(xv + e, x.shape)))
        fm = vec(fun(unvec(xv - e, x.shape)))
        cols.append((fp - fm) / (2 * step))
    return np.stack(cols, axis=1)


def fd_complex_gradient(fun, X, step=FD_STEP):
    """Wirtinger gradient ``df/dX^* = (df/dRe + 1j df/dIm) / 2`` by central differences."""
    X = np.asarray(X, dtype=complex)
    d_re = fd_gradient(lambda R: fun(R + 1j * X.imag), X.real, step)
    d_im = fd_gradient(lambda I: fun(X.real + 1j * I), X.imag, step)
    return (d_re + 1j * d_im) / 2


def fd_complex_hessian_blocks(grad_fun, X, step=FD_STEP):
    """Finite-difference estimate of ``(H_f_fstar, H_fstar_fstar)`` from a complex gradient."""
    X = np.asarray(X, dtype=complex)
    xv = vec(X)
    n = xv.size
    H1 = np.zeros((n, n), dtype=complex)
    H2 = np.zeros((n, n), dtype=complex)
    for p in range(n):
        e = np.zeros(n, dtype=complex)
        e[p] = step
        d_re = (vec(grad_fun(unvec(xv + e, X.shape)))
                - vec(grad_fun(unvec(xv - e, X.shape)))) / (2 * step)
        d_im = (vec(grad_fun(unvec(xv + 1j * e, X.shape)))
                - vec(grad_fun(unvec(xv - 1j * e, X.shape)))) / (2 * step)
        H1[:, p] = (d_re - 1j * d_im) / 2
        H2[:, p] = (d_re + 1j * d_im) / 2
    return H1, H2
