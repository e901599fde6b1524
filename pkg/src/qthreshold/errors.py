"""Exception hierarchy shared by all modules.

`ValidationError` signals bad user input (CLI exit code 1); every other
`QThresholdError` is a numerical failure (exit code 2).
"""


class QThresholdError(Exception):
    """Base class for all package errors."""


class ValidationError(QThresholdError, ValueError):
    """Invalid configuration or argument supplied by the caller."""


class NumericalError(QThresholdError, ArithmeticError):
    """A numerical procedure could not deliver its contract."""


class DomainError(NumericalError, ValueError):
    """Argument outside the mathematical domain of the operation."""


class PoleError(DomainError):
    """Evaluation at a pole of a meromorphic function."""


class ConvergenceError(NumericalError):
    """Series, scan or iteration failed to converge."""


class IntegrationError(NumericalError):
    """ODE step control failed."""


class StiffnessError(NumericalError):
    """Potential magnitude exceeds the configured integration bound."""


class DegenerateError(NumericalError):
    """Vanishing denominator in a matching formula."""


class DecaySelectionError(NumericalError):
    """The decaying solution inside a wall could not be isolated."""


class AsymptoticsViolation(NumericalError):
    """Initial wavepacket is not localized in the asymptotic region."""


class SelfTestError(NumericalError):
    """Startup consistency check of a propagation failed."""


class WindowError(NumericalError):
    """Time window too short for the arrival signal to decay."""


class EnergyDriftError(NumericalError):
    """Classical integrator violated the energy-conservation gate."""


class NoCrossingError(NumericalError):
    """Too many trajectories never reached the detector position."""


class QuadratureWarning(UserWarning):
    """Doubling the quadrature resolution changed sampled results."""
