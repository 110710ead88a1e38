"""Cautious BFGS over the reduced phase matrix with a doubling/halving line search."""

import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import blas

from ._linalg import svd_canonical
from .calculus import HESSIAN_CAP, hess_phi, value_and_grad_phi, vec
from .exceptions import HessianTooLargeError, IllConditionedAnalogError
from .factorization import (
    COND_THRESHOLD,
    FactorizationProblem,
    HybridPrecoder,
    analog_to_phases,
    digital_from_analog,
    _objective,
    phases_to_analog,
)

logger = logging.getLogger(__name__)

STOP_TOLERANCE = "tolerance"
STOP_MAX_ITER = "max_iter"
STOP_STALL = "line_search_stall"

B0_EXACT = "exact-hessian"
B0_IDENTITY = "identity"


@dataclass(frozen=True)
class SolverConfig:
    eta_bfgs: float = 1e-6
    delta_bfgs: float = 1e-6
    beta_bfgs: float = 0.5
    epsilon: float = 1e-4
    delta_min: float = 1e-4
    rho0: float = 1.0
    max_iter: int = 1000
    k2_cap: int = 60
    k1_cap: int = 60
    b0_mode: str = B0_EXACT
    hessian_cap: int = HESSIAN_CAP

    def __post_init__(self):
        for name in ("eta_bfgs", "delta_bfgs", "epsilon", "delta_min", "rho0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if not 0 < self.beta_bfgs <= 0.5:
            raise ValueError(f"beta_bfgs must lie in (0, 0.5], got {self.beta_bfgs}")
        for name in ("max_iter", "k1_cap", "k2_cap"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.b0_mode not in (B0_EXACT, B0_IDENTITY):
            raise ValueError(f"b0_mode must be {B0_EXACT!r} or {B0_IDENTITY!r}")


@dataclass
class SolveReport:
    iterations: int
    objective_trace: np.ndarray
    grad_norm_final: float
    stop_reason: str
    wall_time: float
    ill_conditioned: bool = False
    b0_mode: str = B0_EXACT
    Phi: np.ndarray = field(default=None, repr=False)

    @property
    def objective(self):
        return float(self.objective_trace[-1])

    def to_dict(self):
        return {
            "iterations": self.iterations,
            "objective_initial": float(self.objective_trace[0]),
            "objective_final": self.objective,
            "objective_trace": [float(v) for v in self.objective_trace],
            "grad_norm_final": self.grad_norm_final,
            "stop_reason": self.stop_reason,
            "wall_time": self.wall_time,
            "ill_conditioned": self.ill_conditioned,
            "b0_mode": self.b0_mode,
        }


def default_init_basis(F_opt, N_rf):
    """Leading ``N_rf`` left singular vectors of ``F_opt``.

    When ``N_rf`` exceeds the rank of ``F_opt`` the basis simply continues
    with the next left singular vectors of the full SVD.
    """
    U, _, _ = svd_canonical(F_opt, side="left")
    return U[:, :N_rf]


def init_phase(U_F):
    """Starting phases: phases of rows ``2..N_t`` of ``U_F`` minus the row-1 phases.

    ``angle(0)`` is taken as 0, so zero entries never raise.
    """
    return analog_to_phases(U_F)


def inverse_hessian_from(hessian, delta_min):
    """``U diag(1/max(|lambda|, delta_min)) U^T`` from a symmetric Hessian."""
    lam, U = np.linalg.eigh((hessian + hessian.T) / 2)
    floored = np.maximum(np.abs(lam), delta_min)
    B = (U / floored[None, :]) @ U.T
    return (B + B.T) / 2


def init_inverse_hessian(Phi0, F_opt, delta_min=1e-4, b0_mode=B0_EXACT,
                         hessian_cap=HESSIAN_CAP):
    """Initial inverse-Hessian approximation ``B_0``.

    In ``exact-hessian`` mode the eigenvalues of the Hessian at ``Phi0`` are
    replaced by their moduli (floored at ``delta_min``) and inverted. Above
    ``hessian_cap`` the identity is used instead, with a warning.
    """
    n = np.asarray(Phi0).size
    if b0_mode == B0_IDENTITY:
        return np.eye(n)
    try:
        H = hess_phi(Phi0, F_opt, cap=hessian_cap)
    except HessianTooLargeError as exc:
        logger.warning("%s; falling back to identity B0", exc)
        return np.eye(n)
    return inverse_hessian_from(H, delta_min)


def _direction(g, Bg, delta_bfgs):
    xi = float(g @ Bg)
    return -Bg if xi > delta_bfgs else -g


def descent_direction(B, grad, delta_bfgs=1e-6):
    """``-B g`` when ``g^T B g > delta_bfgs``, else the steepest-descent ``-g``."""
    g = vec(grad)
    s = _direction(g, B @ g, delta_bfgs)
    return s.reshape(np.shape(grad), order="F")


class _InverseHessian:
    """Symmetric matrix kept in the upper triangle of a Fortran array (BLAS symv/syr2)."""

    def __init__(self, B):
        self.a = np.array(B, dtype=float, order="F")

    def matvec(self, v):
        return blas.dsymv(1.0, self.a, v)

    def update(self, s, y, grad_norm, eta):
        ys = float(y @ s)
        ss = float(s @ s)
        if ss == 0 or grad_norm == 0 or not ys / (ss * grad_norm) > eta:
            return False
        r = 1.0 / ys
        By = self.matvec(y)
        # rank-two form B + s a^T + a s^T of the inverse BFGS formula
        a = 0.5 * (r * r * float(y @ By) + r) * s - r * By
        self.a = blas.dsyr2(1.0, s, a, a=self.a, overwrite_a=1)
        return True

    def full(self):
        return np.triu(self.a) + np.triu(self.a, 1).T


def _armijo(fun, Phi, S, f0, slope, beta):
    def member(rho):
        try:
            val = fun(Phi + rho * S)
        except IllConditionedAnalogError:
            return False, np.inf
        return val <= f0 + rho * beta * slope, val

    return member


def line_search(fun, Phi, S, rho_prev, f0, slope, beta=0.5, k1_cap=60, k2_cap=60):
    """Modified backtracking: grow ``rho_prev`` by doubling or shrink it by halving.

    Membership in the acceptance set means
    ``fun(Phi + rho S) <= f0 + rho * beta * slope``. If ``rho_prev`` is
    accepted, the step is doubled until the next doubling would fail (or
    ``k1_cap`` doublings were taken); otherwise it is halved until accepted.

    Returns
    -------
    (rho, value) : tuple
        Accepted step and objective there; ``(None, None)`` if ``k2_cap``
        halvings never reached the acceptance set.
    """
    member = _armijo(fun, Phi, S, f0, slope, beta)
    ok, val = member(rho_prev)
    if ok:
        rho, best = rho_prev, val
        for _ in range(k1_cap):
            ok, val = member(2 * rho)
            if not ok:
                break
            rho, best = 2 * rho, val
        return rho, best
    rho = rho_prev
    for _ in range(k2_cap):
        rho /= 2
        ok, val = member(rho)
        if ok:
            return rho, val
    return None, None


def cautious_update(B, s, y, grad_norm, eta=1e-6):
    """Inverse BFGS update, applied only if ``y^T s / (|s|^2 |g|) > eta``.

    Returns ``B`` itself when the curvature test fails.
    """
    Bh = _InverseHessian(B)
    if not Bh.update(vec(s).astype(float), vec(y).astype(float), grad_norm, eta):
        return B
    return Bh.full()


def _final_precoder(Phi, F_opt, cond_threshold):
    F_RF = phases_to_analog(Phi)
    try:
        return HybridPrecoder(F_RF, digital_from_analog(F_RF, F_opt, cond_threshold)), False
    except IllConditionedAnalogError:
        F_BB = np.linalg.lstsq(F_RF, F_opt, rcond=1e-12)[0]
        return HybridPrecoder(F_RF, F_BB), True


def solve(problem, config=None, U_F=None, Phi0=None, cond_threshold=COND_THRESHOLD):
    """Factorize ``problem.F_opt`` into a constant-modulus ``F_RF`` and ``F_BB``.

    Parameters
    ----------
    problem : FactorizationProblem
    config : SolverConfig, optional
    U_F : ndarray (N_t, N_rf), optional
        Matrix whose phases seed the analog precoder. Defaults to the leading
        left singular vectors of ``F_opt``.
    Phi0 : ndarray (N_t - 1, N_rf), optional
        Explicit starting phases; overrides ``U_F``.

    Returns
    -------
    precoder : HybridPrecoder
    report : SolveReport

    Raises
    ------
    IllConditionedAnalogError
        If the starting analog precoder is rank deficient.
    """
    if not isinstance(problem, FactorizationProblem):
        raise TypeError("problem must be a FactorizationProblem")
    cfg = config or SolverConfig()
    F_opt = problem.F_opt
    t0 = time.perf_counter()

    if Phi0 is None:
        if U_F is None:
            U_F = default_init_basis(F_opt, problem.N_rf)
        Phi0 = init_phase(U_F)
    Phi = np.array(Phi0, dtype=float)

    F_norm2 = problem.P

    def fun(P):
        return _objective(P, F_opt, F_norm2, cond_threshold)

    f, g = value_and_grad_phi(Phi, F_opt, cond_threshold)
    trace = [f]
    gnorm = float(np.linalg.norm(g))
    n_iter = 0
    stop = STOP_MAX_ITER
    b0_mode = cfg.b0_mode
    if b0_mode == B0_EXACT and problem.N_t * problem.N_rf > cfg.hessian_cap:
        logger.warning("N_t*N_rf=%d exceeds hessian_cap=%d; using identity B0",
                       problem.N_t * problem.N_rf, cfg.hessian_cap)
        b0_mode = B0_IDENTITY

    if gnorm < cfg.epsilon:
        stop = STOP_TOLERANCE
    else:
        B = _InverseHessian(
            init_inverse_hessian(Phi, F_opt, cfg.delta_min, b0_mode, cfg.hessian_cap))
        rho = cfg.rho0
        while n_iter < cfg.max_iter:
            gv = vec(g)
            sv = _direction(gv, B.matvec(gv), cfg.delta_bfgs)
            S = sv.reshape(g.shape, order="F")
            slope = float(gv @ sv)
            rho_new, f_new = line_search(fun, Phi, S, rho, f, slope, cfg.beta_bfgs,
                                         cfg.k1_cap, cfg.k2_cap)
            if rho_new is None:
                stop = STOP_STALL
                break
            rho = rho_new
            Phi_new = Phi + rho * S
            _, g_new = value_and_grad_phi(Phi_new, F_opt, cond_threshold)
            n_iter += 1
            trace.append(f_new)
            gnorm_new = float(np.linalg.norm(g_new))
            rel = abs(f_new - f) / max(f_new, 1e-300)
            if min(rel, gnorm_new) < cfg.epsilon:
                Phi, f, g, gnorm = Phi_new, f_new, g_new, gnorm_new
                stop = STOP_TOLERANCE
                break
            B.update(vec(Phi_new - Phi), vec(g_new - g), gnorm, cfg.eta_bfgs)
            Phi, f, g, gnorm = Phi_new, f_new, g_new, gnorm_new

    precoder, ill = _final_precoder(Phi, F_opt, cond_threshold)
    report = SolveReport(
        iterations=n_iter,
        objective_trace=np.asarray(trace),
        grad_norm_final=gnorm,
        stop_reason=stop,
        wall_time=time.perf_counter() - t0,
        ill_conditioned=ill,
        b0_mode=b0_mode,
        Phi=Phi,
    )
    return precoder, report
