import numpy as np


def canonical_columns(U, tol=0.0):
    """Rotate each column so its first entry with modulus > ``tol`` is real positive."""
    U = np.array(U, dtype=complex)
    for j in range(U.shape[1]):
        nz = np.flatnonzero(np.abs(U[:, j]) > tol)
        if nz.size:
            a = U[nz[0], j]
            U[:, j] *= np.conj(a) / abs(a)
    return U


def svd_canonical(M, side="left"):
    """Full SVD ``M = U diag(s) V^H`` with reproducible singular-vector phases.

    Columns of ``U`` (``side="left"``) or of ``V`` (``side="right"``) are
    rotated so their first nonzero entry is real positive; the other factor
    is counter-rotated on the leading ``min(M.shape)`` triplets. Returns
    ``(U, s, V)`` with ``V`` (not ``V^H``).
    """
    U, s, Vh = np.linalg.svd(np.asarray(M, dtype=complex), full_matrices=True)
    V = Vh.conj().T
    k = s.size
    if side == "left":
        U_c = canonical_columns(U)
        d = np.sum(U[:, :k].conj() * U_c[:, :k], axis=0)
        V = V.copy()
        V[:, :k] *= d[None, :]
        return U_c, s, V
    V_c = canonical_columns(V)
    d = np.sum(V[:, :k].conj() * V_c[:, :k], axis=0)
    U = U.copy()
    U[:, :k] *= d[None, :]
    return U, s, V_c
