"""Exception hierarchy shared across the package."""


class ManualRagError(Exception):
    """Base class for all errors raised by this package."""


# --- corpus ---------------------------------------------------------------

class MalformedDocument(ManualRagError):
    """Manual bytes could not be parsed in the declared format."""


class MissingField(ManualRagError):
    """A procedure record lacks a required field (symptom or action)."""

    def __init__(self, message: str, record_ordinal: int):
        super().__init__(message)
        self.record_ordinal = record_ordinal


class UnknownProcedure(ManualRagError):
    """A referenced procedure id does not exist in the corpus."""


# --- embedding / backends -------------------------------------------------

class BackendUnavailable(ManualRagError):
    """A remote backend could not be reached (connection error or timeout)."""


class BackendTimeout(BackendUnavailable):
    """A remote backend did not answer within the configured timeout."""


class BackendMalformed(ManualRagError):
    """A remote backend answered with an unusable payload."""


class DimensionMismatch(ManualRagError):
    """Two vectors (or a vector and an index) disagree on dimensionality."""


# --- index ----------------------------------------------------------------

class DuplicateChunkId(ManualRagError):
    """Two index entries share a chunk id."""


class CorruptIndexFile(ManualRagError):
    """Persisted index bytes are truncated or structurally invalid."""


class VersionMismatch(ManualRagError):
    """Persisted index was written by an incompatible format version."""


# --- rag ------------------------------------------------------------------

class EmptyQuestion(ManualRagError):
    """ask() was called with an empty or whitespace-only question."""


# --- evaluation -----------------------------------------------------------

class EmptyTrialSet(ManualRagError):
    """A statistic was requested over zero trials."""


class IncompleteCell(ManualRagError):
    """An export was requested for a cell that has not finished running."""


class UnlabeledRows(ManualRagError):
    """Annotation import found rows without a label."""


class InsufficientData(ManualRagError):
    """Too few paired observations for a correlation."""


# --- jury -----------------------------------------------------------------

class AllJudgesInvalid(ManualRagError):
    """Every judge reply failed score extraction."""


class JudgeOverlapsRag(ManualRagError):
    """A judge model is also configured as an answering model."""


# --- service / config -----------------------------------------------------

class ConfigInvalid(ManualRagError):
    """Service configuration failed validation."""
