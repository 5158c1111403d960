"""Exception types raised by the numeric routines.

Every error that callers are expected to catch and act on gets its own
class; plain ``ValueError`` is reserved for bad arguments.
"""


class MacGeoError(Exception):
    """Base class for all package-specific errors."""


class SingularityError(MacGeoError):
    """Field evaluated too close to a transmitter location (gain diverges)."""


class UnboundedReceptionError(MacGeoError):
    """No SIR-threshold crossing found along the search ray; the reception
    region is unbounded (or extends past the network edge)."""


class NonClosureError(MacGeoError):
    """Contour trace exhausted its step budget without returning to the
    start point.  The partial trace is attached as ``.trace``."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class StationaryPointError(MacGeoError):
    """Contour trace stepped onto a point with vanishing SIR gradient."""


class PrecisionLossError(MacGeoError):
    """Alternating series lost too many digits to cancellation; the result
    would be numerically meaningless.  Use the Monte Carlo path instead."""


class UnsupportedFadingError(MacGeoError):
    """Requested analytic expression does not exist for this fading model."""


class DivergentMomentError(MacGeoError):
    """Fading moment E[F^s] does not exist for the requested exponent."""


class DivergentSumError(MacGeoError):
    """Interference lattice sum diverges (attenuation exponent <= 2)."""
