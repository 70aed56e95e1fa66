"""Exception hierarchy shared by all radial_lab modules."""

from __future__ import annotations


class RadialLabError(Exception):
    """Base class for every error raised by radial_lab."""


class ValidationError(RadialLabError, ValueError):
    """Parameter tuple violates a structural hypothesis."""


class NonPositiveExponent(ValidationError):
    pass


class DimensionTooSmall(ValidationError):
    pass


class GuardViolation(ValidationError):
    """2p - q + 1 <= 0, so the Keller-Osserman exponent p/(2p-q+1) is undefined."""


class HypothesisViolated(RadialLabError):
    """Operation requires p < 1 and ps + q < 1 (or ps + q != 1)."""


class NonPositiveInitialData(ValidationError):
    pass


class NotABlowUp(RadialLabError):
    """Integration reached r_max before the requested threshold."""


class DegenerateScaling(RadialLabError):
    pass


class WindowTooShort(RadialLabError):
    pass


class DegenerateState(RadialLabError):
    """Phase quotients are undefined (w = 0 or z = 0)."""


class PhaseDivergence(RadialLabError):
    """Phase trajectory left every admissible box."""


class NonMonotoneInput(ValidationError):
    pass


class DivergentTail(RadialLabError):
    pass
