"""Exception hierarchy shared across the pipeline.

Three branches matter to callers: ``ConfigError`` (bad configuration,
CLI exit 2), ``DataError`` (malformed or inconsistent input data, exit 3)
and ``NumericDivergence`` (training blew up, exit 4). Everything else is
a plain ``DrawnetError``.
"""


class DrawnetError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(DrawnetError):
    """Invalid run configuration (unknown key, bad value, bad plan)."""


class DataError(DrawnetError):
    """Input data violates a contract."""


# --- ingest ---------------------------------------------------------------

class MissingColumn(DataError):
    pass


class UnexpectedColumn(DataError):
    pass


class NonNumericCell(DataError):
    pass


class NonMonotoneTime(DataError):
    pass


class TooFewSamples(DataError):
    pass


class InvalidValue(DataError):
    """A parsed value violates a field invariant (range, enum, finiteness)."""


class DanglingPath(DataError):
    pass


class DuplicatePath(DataError):
    pass


class UnknownLabel(DataError):
    pass


# --- preprocess / encode --------------------------------------------------

class DegenerateTime(DataError):
    """Zero time step where a finite-difference denominator is needed."""


class MissingChannel(DataError):
    pass


# --- augment ---------------------------------------------------------------

class InvalidAxis(ConfigError):
    pass


class InvalidAngle(ConfigError):
    pass


class NonSquareGrid(DataError):
    pass


class PlanInvalidForDimension(ConfigError):
    """Augmentation family not applicable to the target dimensionality."""


# --- tensor / net ----------------------------------------------------------

class ShapeMismatch(DrawnetError):
    pass


class IndivisibleExtent(DrawnetError):
    """Pooling window does not tile a spatial extent."""


class NonFiniteLogit(DrawnetError):
    pass


class UnsupportedRank(ConfigError):
    pass


class ShapeUnderflow(ConfigError):
    """Input too small for the fixed layer schedule."""


# --- trainer ---------------------------------------------------------------

class ClassMissing(DataError):
    pass


class EmptyPartition(DataError):
    pass


class EmptyMatrix(DataError):
    pass


class NumericDivergence(DrawnetError):
    """Loss became non-finite; curves would be corrupt past this point."""
