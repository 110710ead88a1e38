"""Hybrid analog/digital precoder factorization with constant-modulus analog weights."""

from .baselines import gaussian_mi, gaussian_mi_precoder, right_singular_basis, waterfilling
from .calculus import grad_f, grad_phi, grad_psi, hess_phi, hess_psi, hessian_blocks_f
from .channel import ChannelRealization, numerical_rank, sample_channel, steering_vector
from .estimator import ConstantModulusFactorizer, WaterfillingPrecoder
from .exceptions import (DegenerateChannelError, DimensionError, EnumerationCapError,
                         HessianTooLargeError, IllConditionedAnalogError, InconsistentInputError,
                         InvalidCovarianceError, NotApplicableError)
from .factorization import (FactorizationProblem, HybridPrecoder, digital_from_analog,
                            objective_qr, phases_to_analog, residual_direct)
from .mi_finite import Constellation, MiEstimate, make_constellation, mi_finite_alphabet
from .realizability import (RealizabilityVerdict, assess, build_KF, exact_factorization,
                            min_rf_chains, necessary_condition, sufficient_condition)
from .solver import SolveReport, SolverConfig, solve

__all__ = [
    "ChannelRealization", "Constellation", "ConstantModulusFactorizer",
    "DegenerateChannelError", "DimensionError", "EnumerationCapError", "FactorizationProblem",
    "HessianTooLargeError", "HybridPrecoder", "IllConditionedAnalogError",
    "InconsistentInputError", "InvalidCovarianceError", "MiEstimate", "NotApplicableError",
    "RealizabilityVerdict", "SolveReport", "SolverConfig", "WaterfillingPrecoder", "assess",
    "build_KF", "digital_from_analog", "exact_factorization", "gaussian_mi",
    "gaussian_mi_precoder", "grad_f", "grad_phi", "grad_psi", "hess_phi", "hess_psi",
    "hessian_blocks_f", "make_constellation", "mi_finite_alphabet", "min_rf_chains",
    "necessary_condition", "numerical_rank", "objective_qr", "phases_to_analog",
    "residual_direct", "right_singular_basis", "sample_channel", "solve", "steering_vector",
    "sufficient_condition", "waterfilling",
]
