"""Exception types shared across the scoring engine.

Validation problems raise ScvindexError subclasses so the CLI can map them
to exit code 1, distinct from I/O failures (exit code 2).
"""


class ScvindexError(Exception):
    """Base class for all validation and contract errors."""


# ---------------------------------------------------------------------------
# Index algebra


class NonFiniteError(ScvindexError):
    pass


class NegativeWeightError(ScvindexError):
    pass


class SimplexViolationError(ScvindexError):
    pass


class ScoreRangeError(ScvindexError):
    pass


class EmptyFactorError(ScvindexError):
    pass


class MissingFactorError(ScvindexError):
    pass


# ---------------------------------------------------------------------------
# Survey encoding


class SchemaError(ScvindexError):
    pass


class DuplicateRuleError(SchemaError):
    pass


class UnknownDimensionError(SchemaError):
    pass


class OutOfRangeScoreError(SchemaError):
    pass


class UnknownQuestionError(ScvindexError):
    pass


class UnmatchedAnswerError(ScvindexError):
    pass


class AllDimensionsMissingError(ScvindexError):
    pass


class MissingComponentError(ScvindexError):
    pass


class MissingHeaderError(ScvindexError):
    pass


class VocabularyError(ScvindexError):
    pass


# ---------------------------------------------------------------------------
# Scam-report pipeline


class MissingLexiconCategoryError(ScvindexError):
    pass


class EmptyCorpusError(ScvindexError):
    pass


class NoFlaggedReportsError(ScvindexError):
    pass


class MissingAnnotationError(ScvindexError):
    pass


class ProviderUnavailableError(ScvindexError):
    pass


# ---------------------------------------------------------------------------
# Statistics


class InfeasibleRangesError(ScvindexError):
    pass


class EmptySelectionError(ScvindexError):
    pass


class LengthMismatchError(ScvindexError):
    pass


class ConstantInputError(ScvindexError):
    pass


class NonPositiveInputError(ScvindexError):
    pass


# ---------------------------------------------------------------------------
# Comparators


class MappingError(ScvindexError):
    pass


class MissingFieldError(ScvindexError):
    pass


class CorpusTooSmallError(ScvindexError):
    pass


# ---------------------------------------------------------------------------
# Rendering


class UnknownStateCodeError(ScvindexError):
    pass


class EmptyInputError(ScvindexError):
    pass
