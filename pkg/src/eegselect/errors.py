"""Exception hierarchy for the channel-selection package.

Every error raised on purpose by this package derives from SelectError so
callers can catch one base class. The CLI maps subclasses to exit codes:
configuration problems -> 2, evaluator/protocol problems -> 3, I/O -> 4.
"""


class SelectError(Exception):
    """Base class for all errors raised by eegselect."""


class ConfigError(SelectError):
    """Invalid or inconsistent run configuration."""


# --- dataset file format ----------------------------------------------------

class DatasetFormatError(SelectError):
    """Malformed tensor dataset file."""


class MagicMismatch(DatasetFormatError):
    """File does not start with the expected magic tag."""


class VersionUnsupported(DatasetFormatError):
    """Header declares a version or dtype this reader does not support."""


class TruncatedPayload(DatasetFormatError):
    """File ends before the declared header/label/payload bytes."""


class LabelOutOfRange(DatasetFormatError):
    """A trial label is outside the expected class range."""


class IoFailure(SelectError):
    """Underlying OS-level read/write failure."""


# --- preprocessing ----------------------------------------------------------

class AllTrialsRejected(SelectError):
    """Artifact rejection removed every trial."""


class WindowOutOfBounds(SelectError):
    """Requested time window is empty or does not fit in the trial."""


class TooFewTrials(SelectError):
    """Not enough trials to perform the requested split."""


# --- subsets / selection ----------------------------------------------------

class InvalidSubset(SelectError):
    """Channel subset violates its universe or canonical-form rules."""


class EmptyUniverse(SelectError):
    """Operation requires at least one channel in the universe."""


class EmptyPool(SelectError):
    """Tournament selection was handed an empty candidate pool."""


class EmptyTally(SelectError):
    """Final-subset selection was handed an empty tally."""


# --- fitness evaluation -----------------------------------------------------

class EvaluatorFailure(SelectError):
    """Fitness evaluator failed; wraps plugin crashes and in-band errors."""


class DegenerateFeatures(EvaluatorFailure):
    """Probe features are unusable (constant channel or starved classes)."""


class ProtocolViolation(EvaluatorFailure):
    """External plugin emitted something the wire protocol forbids."""


class ChildExited(EvaluatorFailure):
    """External plugin process exited while a reply was expected."""


class Timeout(EvaluatorFailure):
    """External plugin did not reply within the allowed time."""


class ScoreOutOfRange(EvaluatorFailure):
    """Reported fitness is outside [0, 1]."""


class StageFailure(SelectError):
    """Pipeline stage failed; carries the stage name and the causing error."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
