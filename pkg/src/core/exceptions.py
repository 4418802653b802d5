from typing import Any, Optional


class RadwaveError(Exception):
    """Base exception for all radwave errors"""

    exit_code = 1

    def __init__(self, message="A radwave error occurred", *args, **kwargs):
        self.message = message
        super().__init__(message, *args, **kwargs)

    def __str__(self):
        return f"{self.__class__.__name__}: {self.message}"


class ConfigError(RadwaveError):
    """Exception raised for invalid run configuration or parameters"""

    exit_code = 2

    def __init__(self, message="A configuration error occurred", *args, **kwargs):
        super().__init__(message, *args, **kwargs)


class SubcriticalExponents(ConfigError):
    """Raised when q(p-1) <= 2, where no global small-data theory exists"""

    def __init__(self, message="Exponents are subcritical: q(p-1) <= 2", *args, **kwargs):
        super().__init__(message, *args, **kwargs)


class ConditionViolated(ConfigError):
    """Raised when a long-range exponent condition fails"""

    def __init__(
        self, message="Long-range condition (p-1)^2 (q-1) > 1 violated", *args, **kwargs
    ):
        super().__init__(message, *args, **kwargs)


class GridError(ConfigError):
    """Raised for invalid grids or samples that do not match a grid"""

    def __init__(self, message="Invalid grid specification", *args, **kwargs):
        super().__init__(message, *args, **kwargs)


class ProfileUnscalable(ConfigError):
    """Raised when a profile family cannot be scaled into Y_nu(eps)"""

    def __init__(self, message="Profile cannot be scaled to the requested bound", *args, **kwargs):
        super().__init__(message, *args, **kwargs)


class SolverError(RadwaveError):
    """Base exception for fixed-point and ladder failures"""

    exit_code = 3

    def __init__(self, message="A solver error occurred", *args, trace: Optional[Any] = None, **kwargs):
        self.trace = trace
        super().__init__(message, *args, **kwargs)


class NoContraction(SolverError):
    """Raised when Picard iterates stop contracting"""

    def __init__(self, message="Picard iteration is not contracting", *args, **kwargs):
        super().__init__(message, *args, **kwargs)


class LeftDomain(SolverError):
    """Raised when an iterate leaves the ball around its anchor"""

    def __init__(self, message="Iterate left the contraction domain", *args, **kwargs):
        super().__init__(message, *args, **kwargs)


class LadderDiverged(SolverError):
    """Raised when the ladder depth search does not terminate"""

    def __init__(self, message="Exponent ladder search did not terminate", *args, **kwargs):
        super().__init__(message, *args, **kwargs)


class MembershipViolation(SolverError):
    """Raised when data fall outside their admissible class"""

    def __init__(self, message="Data outside the admissible class", *args, **kwargs):
        super().__init__(message, *args, **kwargs)


class RangeMismatch(SolverError):
    """Raised when intermediate scattering data leave the inverse's domain"""

    def __init__(self, message="Intermediate data outside the inverse operator's range", *args, **kwargs):
        super().__init__(message, *args, **kwargs)


class TruncationError(RadwaveError):
    """Base exception for domain truncation failures"""

    exit_code = 4

    def __init__(self, message="A truncation error occurred", *args, **kwargs):
        super().__init__(message, *args, **kwargs)


class TailTooFat(TruncationError):
    """Raised when the neglected tail of a backward integral is too large"""

    def __init__(self, message="Neglected source tail exceeds tolerance", *args, **kwargs):
        super().__init__(message, *args, **kwargs)


class VerificationError(RadwaveError):
    """Base exception for failed checks and analyses"""

    exit_code = 5

    def __init__(self, message="A verification error occurred", *args, **kwargs):
        super().__init__(message, *args, **kwargs)


class DegenerateSeries(VerificationError):
    """Raised when a series has too few usable samples to fit"""

    def __init__(self, message="Series has too few samples above the floor", *args, **kwargs):
        super().__init__(message, *args, **kwargs)


class VerificationFailed(VerificationError):
    """Raised when one or more suite checks fail"""

    def __init__(self, message="Verification suite failed", *args, **kwargs):
        super().__init__(message, *args, **kwargs)


class TruncationWarning(UserWarning):
    """Warning for integrands that have not decayed at the radial cutoff"""
