"""Monte Carlo mutual information for uniformly distributed finite-alphabet inputs.

For ``y = Heff x + n`` with ``n ~ CN(0, sigma2 I)`` and ``x`` uniform over the
``K = M**N_s`` vectors of a constellation,

    I = log2 K - (1/K) sum_m E_n[ log2 sum_k exp(-d_mk) ],
    d_mk = (||Heff (x_m - x_k) + n||^2 - ||n||^2) / sigma2.

The expectation over ``n`` is a sample mean; the sum over ``m`` is exact.
Noise for message ``m`` comes from its own stream,
``default_rng(SeedSequence([seed, m]))``, drawing an ``(n_noise, N_r)`` real
block then an imaginary block, each scaled by ``sqrt(sigma2/2)``. The result
therefore does not depend on the order in which messages are processed.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ._validation import check_matrix, check_positive_int
from .exceptions import EnumerationCapError

ENUM_CAP = 4096
N_NOISE = 200

_LABELS = ("PSK", "QAM")


@dataclass(frozen=True)
class Constellation:
    points: np.ndarray
    label: str

    @property
    def M(self):
        return self.points.size


@dataclass(frozen=True)
class MiEstimate:
    bits: float
    std_error: float
    n_noise: int

    def to_dict(self):
        return {"bits": self.bits, "std_error": self.std_error, "n_noise": self.n_noise}


def make_constellation(label, M):
    """Unit-energy PSK or square QAM alphabet.

    PSK: ``M = 2`` is ``{+1, -1}``, ``M = 4`` is ``exp(j*pi/4 * (1, 3, 5, 7))``,
    otherwise ``exp(2j*pi*k/M)``. QAM: square grids only (``M = 4, 16, 64, ...``).
    """
    label = str(label).upper()
    if label not in _LABELS:
        raise ValueError(f"unsupported constellation {label!r}; expected PSK or QAM")
    M = check_positive_int(M, "M", minimum=2)
    if label == "PSK":
        if M == 2:
            pts = np.array([1.0, -1.0], dtype=complex)
        elif M == 4:
            pts = np.exp(1j * np.pi / 4 * np.array([1, 3, 5, 7]))
        else:
            pts = np.exp(2j * np.pi * np.arange(M) / M)
    else:
        side = math.isqrt(M)
        if side * side != M or side & (side - 1):
            raise ValueError(f"QAM needs a square power-of-two order, got M={M}")
        levels = np.arange(-side + 1, side, 2, dtype=float)
        re, im = np.meshgrid(levels, levels[::-1], indexing="xy")
        pts = (re + 1j * im).ravel() / np.sqrt(2 * (M - 1) / 3)
    return Constellation(pts, label)


def _check_cap(M, N_s, cap):
    if M ** N_s > cap:
        raise EnumerationCapError(
            f"M**N_s = {M}**{N_s} = {M ** N_s} exceeds the cap {cap}; reduce N_s or M"
        )


def enumerate_inputs(constellation, N_s, cap=ENUM_CAP):
    """All ``M**N_s`` input vectors as rows, last coordinate varying fastest."""
    N_s = check_positive_int(N_s, "N_s")
    _check_cap(constellation.M, N_s, cap)
    return np.array(list(itertools.product(constellation.points, repeat=N_s)), dtype=complex)


def mi_finite_alphabet(Heff, sigma2, constellation, n_noise=N_NOISE, rng_seed=0,
                       cap=ENUM_CAP):
    """Monte Carlo estimate of the input-output mutual information in bits.

    Parameters
    ----------
    Heff : ndarray, shape (N_r, N_s)
        Effective channel ``H F_RF F_BB``.
    sigma2 : float
        Noise variance per complex receive dimension.
    n_noise : int
        Noise samples per message.
    rng_seed : int

    Returns
    -------
    MiEstimate
        ``std_error`` is the stratified standard error over messages.
    """
    Heff = check_matrix(Heff, "Heff")
    if not sigma2 > 0:
        raise ValueError(f"sigma2 must be > 0, got {sigma2}")
    n_noise = check_positive_int(n_noise, "n_noise")
    if rng_seed is None:
        rng_seed = np.random.SeedSequence().entropy
    X = enumerate_inputs(constellation, Heff.shape[1], cap)
    K = X.shape[0]
    n_r = Heff.shape[0]
    HX = X @ Heff.T  # row k is Heff x_k
    scale = np.sqrt(sigma2 / 2)
    log_k = np.log(K)
    means = np.empty(K)
    variances = np.empty(K)
    for m in range(K):
        rng = np.random.default_rng(np.random.SeedSequence([int(rng_seed), m]))
        noise = (rng.standard_normal((n_noise, n_r))
                 + 1j * rng.standard_normal((n_noise, n_r))) * scale
        D = HX[m] - HX  # (K, N_r)
        # ||D_k + n||^2 - ||n||^2 = ||D_k||^2 + 2 Re(n^H D_k)
        d = (np.sum(np.abs(D) ** 2, axis=1)[None, :]
             + 2 * (noise.conj() @ D.T).real) / sigma2
        v = logsumexp(-d, axis=1) - log_k
        means[m] = v.mean()
        variances[m] = v.var(ddof=1) if n_noise > 1 else 0.0
    bits = -means.mean() / np.log(2) + 0.0
    se = np.sqrt(variances.sum() / n_noise) / K / np.log(2)
    return MiEstimate(float(bits), float(se), n_noise)
