"""Exception hierarchy shared across the toolkit."""


class SemTestError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(SemTestError):
    """Malformed or inconsistent configuration."""


class DimensionMismatchError(SemTestError):
    """Operands have incompatible dimensions."""


class BadMagicError(SemTestError):
    """Tensor file does not start with the EMT1 magic."""


class BadDtypeError(SemTestError):
    """Tensor file declares an unknown dtype code."""


class TruncatedFileError(SemTestError):
    """Tensor file ends before the declared payload."""


class NormOutOfToleranceError(SemTestError):
    """Embedding vector norm deviates from 1 by more than the read tolerance."""


class ZeroImageEmbeddingError(SemTestError):
    """Linear encoder produced a (near-)zero vector; no direction to normalize."""


class UnknownIdError(SemTestError):
    """Requested id is absent from a stored embedding table."""


class ExternalProcessError(SemTestError):
    """External estimator process failed or produced no valid output."""


class UnsupportedNoiseFamilyError(SemTestError):
    """Noise family without a closed-form splitting recipe in this toolkit."""


class NonIntegerCountsError(SemTestError):
    """Scaled-Poisson measurement entries are not integer multiples of gamma."""


class NoFeasibleLambdaError(SemTestError):
    """No temperature in range brings the null e-value mean under the target."""


class DegenerateHypothesesError(SemTestError):
    """The two hypothesis embeddings coincide; the test has no signal."""
