"""Exception types raised across the package."""


class DimensionError(ValueError):
    """Matrix or count arguments have incompatible or invalid shapes."""


class IllConditionedAnalogError(ArithmeticError):
    """The analog precoder is (numerically) rank deficient.

    Raised when the condition number of the triangular QR factor of ``F_RF``
    exceeds the configured threshold.
    """

    def __init__(self, cond, threshold=1e12):
        self.cond = cond
        self.threshold = threshold
        super().__init__(
            f"analog precoder is ill-conditioned: cond(R)={cond:.3e} > {threshold:.1e}"
        )


class HessianTooLargeError(MemoryError):
    """Dense Hessian would exceed the configured dimension cap."""

    def __init__(self, dim, cap):
        self.dim = dim
        self.cap = cap
        super().__init__(
            f"Hessian dimension {dim} exceeds cap {cap}; use b0_mode='identity'"
        )


class NotApplicableError(ValueError):
    """A construction was requested outside the regime where it exists."""


class InconsistentInputError(ValueError):
    """Inputs contradict each other (e.g. F_opt outside the channel's span)."""


class DegenerateChannelError(ValueError):
    """The channel matrix carries no energy."""


class InvalidCovarianceError(ValueError):
    """A transmit covariance is not positive semidefinite."""


class EnumerationCapError(ValueError):
    """The input alphabet M**N_s exceeds the enumeration cap."""
