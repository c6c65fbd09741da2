class G2Error(Exception):
    """Base exception for all g2sphere errors."""

    code = "G2"


class ParameterDomainError(G2Error):
    """Raised when parameters fall outside the admissible domain."""

    code = "PARAM_DOMAIN"


class DefinitenessError(G2Error):
    """Raised when a 3-form does not induce a definite bilinear form."""

    code = "INDEFINITE"


class OrientationError(G2Error):
    """Raised when a 3-form induces a negative definite bilinear form."""

    code = "ORIENTATION"


class DegreeError(G2Error):
    """Raised when form degrees are incompatible with an operation."""

    code = "DEGREE"


class UnsupportedCaseError(G2Error):
    """Raised when a closed form is requested outside its parameter family."""

    code = "UNSUPPORTED"


class NotCriticalError(G2Error):
    """Raised when stability is requested away from a critical point."""

    code = "NOT_CRITICAL"

    def __init__(self, message: str, div_norm: float | None = None):
        """Initialize NotCriticalError.

        Args:
            message: Error message
            div_norm: Norm of the divergence of the full torsion at the
                rejected point (if computed)
        """
        super().__init__(message)
        self.div_norm = div_norm


class IntegrationError(G2Error):
    """Raised when a flow integration step is rejected."""

    code = "INTEGRATION"

    def __init__(
        self, message: str, t: float | None = None, drift: float | None = None, rise: float | None = None
    ):
        """Initialize IntegrationError.

        Args:
            message: Error message
            t: Flow time at which the step was rejected
            drift: Deviation of |m| from 1 before renormalization
            rise: Increase of |T|^2 over the previous sample (forward flow only)
        """
        super().__init__(message)
        self.t = t
        self.drift = drift
        self.rise = rise


class UsageError(G2Error):
    """Raised when command-line arguments are missing or malformed."""

    code = "ARGS"
