"""Exception types shared across the toolkit."""


class SeqcastError(Exception):
    """Base class for every error raised by this package."""


class MalformedRow(SeqcastError):
    """A data row has the wrong field count or a non-numeric cell."""


class EmptyInput(SeqcastError):
    """No usable data rows / values were supplied."""


class UnknownVehicle(SeqcastError):
    """Requested vehicle id is absent from the parsed records."""


class DuplicateFrame(SeqcastError):
    """A vehicle has two records for the same frame number."""


class InvalidPeriod(SeqcastError):
    """Resampling period is non-positive or finer than the source."""


class InvalidRange(SeqcastError):
    """State-grid bounds or spacing do not describe a valid grid."""


class NonFiniteInput(SeqcastError):
    """A query value is NaN or infinite."""


class InvalidHorizon(SeqcastError):
    """Prediction horizon is below one step."""


class OutOfDomain(SeqcastError):
    """Query value lies outside the fuzzy partition's domain."""


class AllZeroPossibility(SeqcastError):
    """Every membership degree vanished; nothing to normalize."""


class UnfittedModel(SeqcastError):
    """Prediction was requested from a model with no observations."""


class DimensionMismatch(SeqcastError):
    """Array shapes passed to the network are inconsistent."""


class InsufficientData(SeqcastError):
    """A training sequence is too short to form input/target pairs."""


class DivergedTraining(SeqcastError):
    """Training loss became non-finite."""


class LengthMismatch(SeqcastError):
    """Paired sequences differ in length."""


class EmptySeries(SeqcastError):
    """A chart series contains no points."""


class TooManySeries(SeqcastError):
    """More series were supplied than one chart supports."""


class ModelFormatError(SeqcastError):
    """A persisted model file does not match the expected layout."""


class ConfigError(SeqcastError):
    """A configuration file or option set is invalid."""
