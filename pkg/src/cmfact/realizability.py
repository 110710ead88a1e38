"""When can a target precoder be factorized exactly with constant-modulus analog weights.

Two tests are provided. The sufficient one is a dimension count on the
channel (``L <= min(N_r, N_t, N_rf)``): then the transmit steering matrix
itself is a valid analog precoder. The necessary one bounds the rank of

    K_F = [diag(conj(u_1)) U_F, ..., diag(conj(u_Nrf)) U_F]

by ``N_rf**2 - N_rf + 1``, where ``U_F`` spans the column space of ``F_opt``.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ._validation import check_matrix, check_positive_int, check_rf_dims
from .baselines import right_singular_basis
from .channel import RANK_TOL, ChannelRealization, numerical_rank
from .exceptions import InconsistentInputError, NotApplicableError
from .factorization import HybridPrecoder

SPAN_TOL = 1e-8


@dataclass(frozen=True)
class RealizabilityVerdict:
    sufficient_holds: bool
    necessary_holds: bool
    rank_KF: int
    bound: int
    min_rf_for_full_rank_KF: int

    def to_dict(self):
        return {
            "sufficient_holds": self.sufficient_holds,
            "necessary_holds": self.necessary_holds,
            "rank_KF": self.rank_KF,
            "bound": self.bound,
            "min_rf_for_full_rank_KF": self.min_rf_for_full_rank_KF,
        }


def _rank_bound(n_rf):
    return n_rf * n_rf - n_rf + 1


def build_KF(U_F, semi_unitary_tol=1e-8):
    """Stack ``diag(conj(u_l)) U_F`` for every column ``u_l`` of ``U_F``.

    Row ``k`` of the result is row ``k*N_t + k`` (0-based) of
    ``kron(conj(U_F), U_F)``. A warning is issued if ``U_F`` is not
    semi-unitary.
    """
    U_F = check_matrix(U_F, "U_F")
    gram = U_F.conj().T @ U_F
    if np.max(np.abs(gram - np.eye(U_F.shape[1]))) > semi_unitary_tol:
        warnings.warn("U_F is not semi-unitary", RuntimeWarning, stacklevel=2)
    # column l*N_rf + m holds conj(U[:, l]) * U[:, m]
    return (U_F.conj()[:, :, None] * U_F[:, None, :]).reshape(U_F.shape[0], -1)


def necessary_condition(U_F, tol=RANK_TOL):
    """``(rank(K_F) <= N_rf**2 - N_rf + 1, rank(K_F))``."""
    U_F = check_matrix(U_F, "U_F")
    rank = numerical_rank(build_KF(U_F), tol)
    return rank <= _rank_bound(U_F.shape[1]), rank


def min_rf_chains(N_t):
    """Smallest ``N_rf`` with ``N_rf**2 - N_rf + 1 >= N_t``."""
    N_t = check_positive_int(N_t, "N_t")
    n = max(1, math.ceil(math.sqrt(N_t - 0.75) + 0.5))
    # guard against floating error at exact boundaries
    while n > 1 and _rank_bound(n - 1) >= N_t:
        n -= 1
    while _rank_bound(n) < N_t:
        n += 1
    return n


def sufficient_condition(L, N_r, N_t, N_rf):
    """Exact factorization is guaranteed when ``L <= min(N_r, N_t, N_rf)``."""
    return bool(L <= min(N_r, N_t, N_rf))


def padding_columns(A, n_extra, max_cond=1e8):
    """``n_extra`` constant-modulus columns that keep ``[A, pad]`` well conditioned.

    Candidates are DFT columns ``exp(2j*pi*k*m/N_t)/sqrt(N_t)`` taken in order
    ``m = 0, 1, ...``; ``m = 0`` is the constant column.
    """
    A = np.asarray(A, dtype=complex)
    n_t = A.shape[0]
    k = np.arange(n_t)
    cols = []
    for m in range(n_t):
        if len(cols) == n_extra:
            break
        c = np.exp(2j * np.pi * k * m / n_t) / np.sqrt(n_t)
        trial = np.column_stack([A] + cols + [c])
        if np.linalg.cond(trial) < max_cond:
            cols.append(c)
    if len(cols) < n_extra:
        raise NotApplicableError("could not complete the analog precoder to full column rank")
    return np.column_stack(cols) if cols else np.zeros((n_t, 0), dtype=complex)


def exact_factorization(channel, F_opt, N_rf, span_tol=SPAN_TOL):
    """Exact hybrid factorization of a target lying in the span of ``channel.A_t``.

    ``F_RF = [A_t, pad]`` with ``pad`` from :func:`padding_columns` (the
    constant column first); ``F_BB`` is ``A_t^+ F_opt`` stacked over zero rows.

    Raises
    ------
    NotApplicableError
        If ``L > min(N_r, N_t, N_rf)``.
    InconsistentInputError
        If the columns of ``F_opt`` leave ``span(A_t)`` by more than ``span_tol``
        (relative Frobenius residual).
    """
    if not isinstance(channel, ChannelRealization):
        raise TypeError("channel must be a ChannelRealization")
    F_opt = check_matrix(F_opt, "F_opt")
    N_rf = check_positive_int(N_rf, "N_rf")
    N_t, L = channel.N_t, channel.L
    check_rf_dims(N_t, F_opt.shape[1], N_rf)
    if F_opt.shape[0] != N_t:
        raise InconsistentInputError(f"F_opt has {F_opt.shape[0]} rows, channel has N_t={N_t}")
    if not sufficient_condition(L, channel.N_r, N_t, N_rf):
        raise NotApplicableError(
            f"L={L} exceeds min(N_r, N_t, N_rf)={min(channel.N_r, N_t, N_rf)}"
        )
    A_t = np.asarray(channel.A_t)
    coef, *_ = np.linalg.lstsq(A_t, F_opt, rcond=None)
    norm = np.linalg.norm(F_opt)
    if norm > 0 and np.linalg.norm(F_opt - A_t @ coef) > span_tol * norm:
        raise InconsistentInputError("F_opt is not in the span of the transmit steering matrix")
    pad = padding_columns(A_t, N_rf - L)
    F_RF = np.hstack([A_t, pad])
    F_BB = np.vstack([coef, np.zeros((N_rf - L, F_opt.shape[1]), dtype=complex)])
    return HybridPrecoder(F_RF, F_BB)


def channel_basis(H, N_rf, tol=RANK_TOL, A_t=None):
    """Semi-unitary ``U_F`` for the necessary test.

    The leading ``N_rf`` right singular vectors of ``H``; if ``rank(H) < N_rf``
    only the first ``rank(H)`` are kept and the rest come from orthonormalizing
    :func:`padding_columns` against them. When ``A_t`` is given and spans the
    row space of ``H`` with at most ``N_rf`` columns, its orthonormal basis
    replaces the singular vectors: same subspace (``rank(K_F)`` is invariant
    under ``U_F -> U_F S``) without the roundoff of weak singular directions.
    """
    r = numerical_rank(H, tol)
    if A_t is not None and np.asarray(A_t).shape[1] == r <= N_rf:
        head, _ = np.linalg.qr(np.asarray(A_t, dtype=complex))
    else:
        V = right_singular_basis(H, N_rf)
        if r >= N_rf:
            return V
        head = V[:, :r]
    if head.shape[1] == N_rf:
        return head
    Q, _ = np.linalg.qr(np.column_stack([head, padding_columns(head, N_rf - head.shape[1])]))
    return np.column_stack([head, Q[:, head.shape[1]:]])


def assess(channel, N_rf, tol=RANK_TOL):
    """Both realizability tests, the necessary one on :func:`channel_basis`."""
    N_rf = check_positive_int(N_rf, "N_rf")
    ok, rank = necessary_condition(channel_basis(channel.H, N_rf, tol, channel.A_t), tol)
    return RealizabilityVerdict(
        sufficient_holds=sufficient_condition(channel.L, channel.N_r, channel.N_t, N_rf),
        necessary_holds=bool(ok),
        rank_KF=int(rank),
        bound=_rank_bound(N_rf),
        min_rf_for_full_rank_KF=min_rf_chains(channel.N_t),
    )
