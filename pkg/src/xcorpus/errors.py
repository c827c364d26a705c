"""Exception hierarchy.

Every failure mode the toolkit can report is a subclass of :class:`XcorpusError`.
Input problems additionally derive from :class:`ValueError` so that callers
catching the builtin keep working.
"""


class XcorpusError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(XcorpusError, ValueError):
    """A domain object violates one of its invariants."""


class NonFinite(ValidationError):
    def __init__(self, index):
        self.index = int(index)
        super().__init__(f"non-finite sample at index {self.index}")


class NonPositiveRate(ValidationError):
    pass


class Empty(ValidationError):
    pass


# ingest
class MissingFile(XcorpusError, FileNotFoundError):
    pass


class ParseError(XcorpusError, ValueError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = f"{path}:{line}: " if path is not None and line is not None else ""
        super().__init__(f"{where}{message}")


class SchemeMismatch(ValidationError):
    pass


class RateMissing(ValidationError):
    pass


class InvalidConfig(ValidationError):
    pass


# dsp
class TooShort(ValidationError):
    pass


class WrongModality(ValidationError):
    pass


class NoBeatsFound(XcorpusError):
    pass


class TooFewBeats(XcorpusError):
    pass


class SpanTooShort(XcorpusError):
    pass


# features
class PhaseTooShort(ValidationError):
    pass


class InsufficientBeats(XcorpusError):
    pass


class DegenerateSpectrum(XcorpusError):
    pass


class NoWindows(XcorpusError):
    pass


class TooFewSamples(ValidationError):
    pass


# labels
class SchemeRangeViolation(ValidationError):
    pass


# ml
class MinorityTooSmall(ValidationError):
    pass


class SingleClass(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class ModelMissing(ValidationError):
    pass


class EmptyGrid(ValidationError):
    pass


# eval
class ProtocolError(XcorpusError):
    """A protocol was invoked with inconsistent arguments."""


class TooFewParticipants(ProtocolError, ValueError):
    pass


class SameCorpus(ProtocolError, ValueError):
    pass


class SingleClassTestForAuc(ProtocolError, ValueError):
    pass


class HeldOutNotFound(ProtocolError, KeyError):
    pass


class LengthMismatch(ValidationError):
    pass


# lmm
class RankDeficient(ValidationError):
    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__("design matrix is rank deficient; dependent columns: "
                         + ", ".join(str(c) for c in self.columns))


class TooFewGroups(ValidationError):
    pass


class NotConverged(XcorpusError):
    pass


class NonConvergenceWarning(UserWarning):
    """The variance-ratio search stopped early; the best fit found is returned."""
