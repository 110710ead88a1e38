"""scikit-learn style wrappers over the functional API.

Both estimators take a matrix (not a sample table) in ``fit``: the target
precoder for :class:`ConstantModulusFactorizer` and the channel for
:class:`WaterfillingPrecoder`. ``transform`` maps symbol blocks, one row per
channel use, through the fitted precoder.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_matrix
from .baselines import waterfilling
from .factorization import FactorizationProblem
from .solver import B0_EXACT, SolverConfig, solve


def _apply(F, X, name):
    X = check_matrix(X, "X")
    if X.shape[1] != F.shape[1]:
        raise ValueError(f"X has {X.shape[1]} columns, {name} expects {F.shape[1]} streams")
    return X @ F.T


class ConstantModulusFactorizer(TransformerMixin, BaseEstimator):
    """Factorize ``F_opt`` into a constant-modulus ``F_RF`` and a digital ``F_BB``.

    Parameters
    ----------
    n_rf : int
        Number of RF chains.
    epsilon, max_iter, b0_mode, eta_bfgs, delta_bfgs, beta_bfgs, delta_min
        Forwarded to :class:`~cmfact.solver.SolverConfig`.
    normalize : bool
        Rescale ``F_BB`` after fitting so that ``||F_RF F_BB||_F^2 == ||F_opt||_F^2``.

    Attributes
    ----------
    F_RF_, F_BB_ : ndarray
    report_ : SolveReport
    n_iter_ : int
    """

    def __init__(self, n_rf=1, epsilon=1e-4, max_iter=1000, b0_mode=B0_EXACT,
                 eta_bfgs=1e-6, delta_bfgs=1e-6, beta_bfgs=0.5, delta_min=1e-4,
                 normalize=False):
        self.n_rf = n_rf
        self.epsilon = epsilon
        self.max_iter = max_iter
        self.b0_mode = b0_mode
        self.eta_bfgs = eta_bfgs
        self.delta_bfgs = delta_bfgs
        self.beta_bfgs = beta_bfgs
        self.delta_min = delta_min
        self.normalize = normalize

    def _config(self):
        return SolverConfig(eta_bfgs=self.eta_bfgs, delta_bfgs=self.delta_bfgs,
                            beta_bfgs=self.beta_bfgs, epsilon=self.epsilon,
                            delta_min=self.delta_min, max_iter=self.max_iter,
                            b0_mode=self.b0_mode)

    def fit(self, X, y=None, U_F=None):
        """``X`` is the target ``F_opt`` (N_t x N_s); ``U_F`` optionally seeds the phases."""
        problem = FactorizationProblem(check_matrix(X, "F_opt"), self.n_rf)
        precoder, report = solve(problem, self._config(), U_F=U_F)
        if self.normalize:
            precoder = precoder.normalized(problem.P)
        self.F_RF_ = precoder.F_RF
        self.F_BB_ = precoder.F_BB
        self.report_ = report
        self.n_iter_ = report.iterations
        self.n_features_in_ = problem.N_s
        return self

    def reconstruct(self):
        """Effective precoder ``F_RF_ @ F_BB_``."""
        check_is_fitted(self, "F_RF_")
        return self.F_RF_ @ self.F_BB_

    def transform(self, X):
        """Transmit vectors ``X @ (F_RF F_BB)^T`` for symbol rows ``X`` (n, N_s)."""
        return _apply(self.reconstruct(), X, type(self).__name__)

    def score(self, X, y=None):
        """Negative squared Frobenius error against target ``X``."""
        E = check_matrix(X, "F_opt") - self.reconstruct()
        return -float(np.vdot(E, E).real)


class WaterfillingPrecoder(TransformerMixin, BaseEstimator):
    """Gaussian-input optimal precoder of a channel ``H`` (passed to ``fit``)."""

    def __init__(self, n_streams=1, power=1.0, sigma2=1.0):
        self.n_streams = n_streams
        self.power = power
        self.sigma2 = sigma2

    def fit(self, X, y=None):
        sol = waterfilling(check_matrix(X, "H"), self.power, self.sigma2, self.n_streams)
        self.F_opt_ = sol.F_opt
        self.powers_ = sol.powers
        self.mu_ = sol.mu
        self.n_features_in_ = self.n_streams
        return self

    def transform(self, X):
        check_is_fitted(self, "F_opt_")
        return _apply(self.F_opt_, X, type(self).__name__)
