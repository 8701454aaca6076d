"""Exception and warning types shared across the toolkit."""


class CueloadError(Exception):
    """Base class for all toolkit errors (CLI maps these to exit code 2)."""


class ParseError(CueloadError):
    """Malformed input file; carries the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class StructureError(CueloadError):
    """Dependency tree violates structural constraints (self-loop, cycle, bad root)."""


class ValidationError(CueloadError):
    """Field value outside its allowed domain."""


class ResolutionError(CueloadError):
    """Annotation references an utterance that does not exist."""


class AlignmentError(CueloadError):
    """Imported record does not line up with the corpus it claims to score."""


class UndefinedValueError(CueloadError):
    """A metric has no defined value on this input (empty sequence, no arcs)."""


class MissingTreeError(CueloadError):
    """Syntax metric requested for an utterance without a dependency tree."""


class DegenerateDataError(CueloadError):
    """Statistical test input admits no answer (e.g. all observations identical)."""


class CorpusWarning(UserWarning):
    """Non-fatal corpus irregularity (skipped lines, missing modalities)."""
