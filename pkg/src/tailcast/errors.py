"""Exception types raised across the library.

Every operation raises a named subclass of :class:`TailcastError` so callers
(and the CLI's machine-readable error output) can dispatch on the class name.
"""


class TailcastError(Exception):
    """Base class for all library errors."""


# --- ingest ---------------------------------------------------------------

class MissingColumn(TailcastError):
    """A schema channel is absent from the CSV header."""


class NonMonotonicTime(TailcastError):
    """Timestamps are out of order, duplicated, or off the hourly grid."""


class GapTooLarge(TailcastError):
    """A run of missing timestamp rows exceeds the configured limit."""


class InsufficientNeighbors(TailcastError):
    """Fewer complete rows than the requested neighbor count."""


class UnknownDirection(TailcastError):
    """Wind direction label is not one of the 16 compass points."""


# --- seasonal -------------------------------------------------------------

class DegenerateFit(TailcastError):
    """A local regression system is singular."""


class SpanTooShort(TailcastError):
    """Series does not cover enough calendar time to decompose."""


# --- diagnostics ----------------------------------------------------------

class ZeroVariance(TailcastError):
    """Series (or one of two series) is constant where variance is needed."""


class TooFewPositiveLags(TailcastError):
    """Not enough positive autocorrelation values to fit a decay law."""


class SeriesTooShort(TailcastError):
    """Series is too short for the requested segment sizes."""


class SingularDetrend(TailcastError):
    """Segment too small for the requested detrending order."""


class NoPositiveData(TailcastError):
    """No (or too few) strictly positive values for a tail diagnostic."""


class TailTooSmall(TailcastError):
    """Too few points above the tail cutoff, or a degenerate tail."""


class NonPositiveValue(TailcastError):
    """Log-scale fit received a value <= 0."""


# --- baselines ------------------------------------------------------------

class NoBandCrossing(TailcastError):
    """ACF never enters the confidence band within max_lag."""


class SingularSystem(TailcastError):
    """Least-squares normal equations could not be solved."""


# --- neural ---------------------------------------------------------------

class LengthMismatch(TailcastError):
    """Two vectors that must be the same length are not."""


class NonPositiveBeta(TailcastError):
    """The correntropy scale parameter must be positive."""


class ShapeMismatch(TailcastError):
    """An input window does not match the model's window specification."""


class EmptyDataset(TailcastError):
    """Training requires at least one window."""


class DivergedLoss(TailcastError):
    """Training produced a non-finite loss."""


# --- evaluation -----------------------------------------------------------

class TooFewSamples(TailcastError):
    """Not enough samples to build the requested split plan."""


class ZeroMean(TailcastError):
    """The mean in the active NMBF branch denominator is zero."""


class ZeroDenominator(TailcastError):
    """The sum in the active NMAEF branch denominator is zero."""


# --- cli ------------------------------------------------------------------

class ConfigParseError(TailcastError):
    """A config file line is not `key = value`."""


class SubcommandError(TailcastError):
    """A subcommand failed; wraps the underlying module error."""
