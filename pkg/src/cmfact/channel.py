"""Narrowband mmWave multipath channels on half-wavelength uniform linear arrays.

The generator draws, in this order and from one ``numpy.random.Generator``
(PCG64, seeded with ``rng_seed``):

1. ``theta_r``  -- ``L`` angles of arrival, uniform on ``[0, 2*pi)``
2. ``theta_t``  -- ``L`` angles of departure, uniform on ``[0, 2*pi)``
3. gains        -- an ``(L, 2)`` block of standard normals; column 0 is the
   real part and column 1 the imaginary part, scaled by ``1/sqrt(2)``

The stored ``alpha`` already includes the ``sqrt(N_r*N_t/L)`` factor so that
``H == A_r @ diag(alpha) @ A_t^H`` holds exactly.
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_positive_int, check_random_state

RANK_TOL = 1e-10


@dataclass(frozen=True)
class ChannelRealization:
    """One draw of the multipath channel and its decomposition.

    Attributes
    ----------
    H : ndarray, shape (N_r, N_t)
    A_r : ndarray, shape (N_r, L)
        Receive steering matrix.
    A_t : ndarray, shape (N_t, L)
        Transmit steering matrix.
    alpha : ndarray, shape (L,)
        Complex path gains, including the ``sqrt(N_r*N_t/L)`` scale.
    theta_r, theta_t : ndarray, shape (L,)
        Arrival / departure angles in radians, in ``[0, 2*pi)``.
    seed : int or None
        Seed the realization was drawn with, if known.
    """

    H: np.ndarray
    A_r: np.ndarray
    A_t: np.ndarray
    alpha: np.ndarray
    theta_r: np.ndarray
    theta_t: np.ndarray
    seed: object = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("H", "A_r", "A_t", "alpha", "theta_r", "theta_t"):
            getattr(self, name).setflags(write=False)

    @property
    def L(self):
        return self.alpha.shape[0]

    @property
    def N_r(self):
        return self.H.shape[0]

    @property
    def N_t(self):
        return self.H.shape[1]


def steering_vector(theta, N):
    """ULA response ``a(theta)`` for ``N`` elements spaced half a wavelength.

    Entry ``k`` is ``exp(-1j*pi*k*sin(theta)) / sqrt(N)``.
    """
    N = check_positive_int(N, "N")
    k = np.arange(N)
    return np.exp(-1j * np.pi * k * np.sin(theta)) / np.sqrt(N)


def steering_matrix(thetas, N):
    """Stack ``steering_vector`` over ``thetas`` as columns, shape ``(N, len(thetas))``."""
    N = check_positive_int(N, "N")
    thetas = np.asarray(thetas, dtype=float).ravel()
    k = np.arange(N)[:, None]
    return np.exp(-1j * np.pi * k * np.sin(thetas)[None, :]) / np.sqrt(N)


def channel_from_paths(theta_r, theta_t, alpha, N_r, N_t, seed=None):
    """Assemble a realization from explicit path parameters.

    ``alpha`` is taken as already scaled (see the module docstring).
    """
    theta_r = np.asarray(theta_r, dtype=float).ravel()
    theta_t = np.asarray(theta_t, dtype=float).ravel()
    alpha = np.asarray(alpha, dtype=complex).ravel()
    A_r = steering_matrix(theta_r, N_r)
    A_t = steering_matrix(theta_t, N_t)
    H = (A_r * alpha[None, :]) @ A_t.conj().T
    return ChannelRealization(H, A_r, A_t, alpha, theta_r, theta_t, seed=seed)


def sample_channel(N_r, N_t, L, rng_seed=None):
    """Draw a channel realization.

    Parameters
    ----------
    N_r, N_t : int
        Receive / transmit antenna counts.
    L : int
        Number of propagation paths.
    rng_seed : int, Generator or None
        Seed for the PCG64 generator. Passing a ``Generator`` continues its
        stream (useful for corpora); ``seed`` is then recorded as ``None``.
    """
    N_r = check_positive_int(N_r, "N_r")
    N_t = check_positive_int(N_t, "N_t")
    L = check_positive_int(L, "L")
    rng = check_random_state(rng_seed)
    theta_r = rng.uniform(0.0, 2 * np.pi, size=L)
    theta_t = rng.uniform(0.0, 2 * np.pi, size=L)
    g = rng.standard_normal((L, 2))
    alpha = (g[:, 0] + 1j * g[:, 1]) / np.sqrt(2) * np.sqrt(N_r * N_t / L)
    seed = rng_seed if isinstance(rng_seed, (int, np.integer)) else None
    return channel_from_paths(theta_r, theta_t, alpha, N_r, N_t, seed=seed)


def numerical_rank(M, tol=RANK_TOL):
    """Number of singular values above ``tol * sigma_max``; 0 for a zero matrix."""
    M = np.asarray(M)
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))
