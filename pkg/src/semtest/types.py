"""Core domain types: images, measurements, forward models, covariances,
unit embeddings and hypothesis pairs.

All types validate their invariants at construction and are immutable
afterwards, so they can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionMismatchError

GAUSSIAN = "gaussian"
SCALED_POISSON = "scaled_poisson"

_UNIT_NORM_TOL = 1e-6


def _as_vector(data, name: str) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise ConfigError(f"{name} must be a non-empty 1-D vector")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ImageVec:
    """Flattened image with optional (height, width, channels) metadata."""

    data: np.ndarray
    shape: tuple[int, int, int] | None = None

    def __post_init__(self):
        object.__setattr__(self, "data", _as_vector(self.data, "image"))
        if self.shape is not None:
            h, w, c = self.shape
            if h * w * c != self.data.size:
                raise ConfigError(
                    f"shape {self.shape} does not match vector length {self.data.size}"
                )
            object.__setattr__(self, "shape", (int(h), int(w), int(c)))

    @property
    def n(self) -> int:
        return self.data.size

    def as_grid(self) -> np.ndarray:
        if self.shape is None:
            raise ConfigError("image has no shape metadata")
        return self.data.reshape(self.shape)


@dataclass(frozen=True)
class MeasurementVec:
    """Sensor-space vector tagged with its noise family."""

    data: np.ndarray
    noise_family: str = GAUSSIAN

    def __post_init__(self):
        object.__setattr__(self, "data", _as_vector(self.data, "measurement"))
        if self.noise_family not in (GAUSSIAN, SCALED_POISSON):
            raise ConfigError(f"unknown noise family: {self.noise_family!r}")
        if self.noise_family == SCALED_POISSON and np.any(self.data < 0):
            raise ConfigError("scaled-Poisson measurements must be non-negative")

    @property
    def m(self) -> int:
        return self.data.size


@dataclass(frozen=True)
class ForwardModel:
    """Linear measurement operator: identity, binary mask, or dense matrix."""

    kind: str
    mask: np.ndarray | None = None
    matrix: np.ndarray | None = None
    n: int | None = None

    IDENTITY = "identity"
    BINARY_MASK = "binary_mask"
    DENSE = "dense"

    def __post_init__(self):
        if self.kind == self.IDENTITY:
            if self.n is None:
                raise ConfigError("identity forward model needs a dimension")
        elif self.kind == self.BINARY_MASK:
            mask = np.asarray(self.mask, dtype=bool)
            mask.setflags(write=False)
            object.__setattr__(self, "mask", mask)
            object.__setattr__(self, "n", mask.size)
        elif self.kind == self.DENSE:
            mat = np.asarray(self.matrix, dtype=np.float64)
            if mat.ndim != 2 or not np.all(np.isfinite(mat)):
                raise ConfigError("dense forward model needs a finite 2-D matrix")
            mat.setflags(write=False)
            object.__setattr__(self, "matrix", mat)
            object.__setattr__(self, "n", mat.shape[1])
        else:
            raise ConfigError(f"unknown forward model kind: {self.kind!r}")

    @classmethod
    def identity(cls, n: int) -> "ForwardModel":
        return cls(kind=cls.IDENTITY, n=n)

    @classmethod
    def binary_mask(cls, mask) -> "ForwardModel":
        return cls(kind=cls.BINARY_MASK, mask=mask)

    @classmethod
    def dense(cls, matrix) -> "ForwardModel":
        return cls(kind=cls.DENSE, matrix=matrix)

    @property
    def m(self) -> int:
        if self.kind == self.DENSE:
            return self.matrix.shape[0]
        return self.n

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.n:
            raise DimensionMismatchError(
                f"forward model expects length {self.n}, got {x.shape[-1]}"
            )
        if self.kind == self.IDENTITY:
            return x.copy()
        if self.kind == self.BINARY_MASK:
            return x * self.mask
        return x @ self.matrix.T

    def as_matrix(self) -> np.ndarray:
        if self.kind == self.IDENTITY:
            return np.eye(self.n)
        if self.kind == self.BINARY_MASK:
            return np.diag(self.mask.astype(np.float64))
        return np.array(self.matrix)


@dataclass(frozen=True)
class CovModel:
    """Noise covariance: scaled identity, diagonal, or dense SPD.

    Dense covariances are Cholesky-factored once at construction; sampling
    and square-root products reuse the cached factor.
    """

    kind: str
    variance: float | None = None
    variances: np.ndarray | None = None
    sigma: np.ndarray | None = None
    dim_: int | None = None
    chol: np.ndarray | None = field(default=None, compare=False)

    SCALED_IDENTITY = "scaled_identity"
    DIAGONAL = "diagonal"
    DENSE_SPD = "dense_spd"

    def __post_init__(self):
        if self.kind == self.SCALED_IDENTITY:
            if self.variance is None or self.variance < 0 or self.dim_ is None:
                raise ConfigError("scaled identity needs variance >= 0 and a dimension")
        elif self.kind == self.DIAGONAL:
            v = np.asarray(self.variances, dtype=np.float64)
            if v.ndim != 1 or np.any(v <= 0):
                raise ConfigError("diagonal covariance needs positive variances")
            v.setflags(write=False)
            object.__setattr__(self, "variances", v)
            object.__setattr__(self, "dim_", v.size)
        elif self.kind == self.DENSE_SPD:
            s = np.asarray(self.sigma, dtype=np.float64)
            if s.ndim != 2 or s.shape[0] != s.shape[1]:
                raise ConfigError("dense covariance must be square")
            try:
                chol = np.linalg.cholesky(s)
            except np.linalg.LinAlgError as exc:
                raise ConfigError(f"covariance is not SPD: {exc}") from exc
            resid = np.max(np.abs(chol @ chol.T - s))
            if resid > 1e-8 * max(np.max(np.abs(s)), 1e-300):
                raise ConfigError("Cholesky residual exceeds tolerance")
            s.setflags(write=False)
            chol.setflags(write=False)
            object.__setattr__(self, "sigma", s)
            object.__setattr__(self, "chol", chol)
            object.__setattr__(self, "dim_", s.shape[0])
        else:
            raise ConfigError(f"unknown covariance kind: {self.kind!r}")

    @classmethod
    def scaled_identity(cls, variance: float, dim: int) -> "CovModel":
        return cls(kind=cls.SCALED_IDENTITY, variance=float(variance), dim_=int(dim))

    @classmethod
    def diagonal(cls, variances) -> "CovModel":
        return cls(kind=cls.DIAGONAL, variances=variances)

    @classmethod
    def dense(cls, sigma) -> "CovModel":
        return cls(kind=cls.DENSE_SPD, sigma=sigma)

    @property
    def dim(self) -> int:
        return self.dim_

    def scaled(self, factor: float) -> "CovModel":
        """Covariance multiplied by a positive scalar (e.g. tau inflation)."""
        if factor < 0:
            raise ConfigError("covariance scale factor must be >= 0")
        if self.kind == self.SCALED_IDENTITY:
            return CovModel.scaled_identity(self.variance * factor, self.dim)
        if self.kind == self.DIAGONAL:
            return CovModel.diagonal(np.asarray(self.variances) * factor)
        return CovModel.dense(np.asarray(self.sigma) * factor)

    def sqrt_apply(self, w: np.ndarray) -> np.ndarray:
        """Apply the covariance square root to standard normal draws.

        ``w`` may be a vector or a (batch, dim) matrix.
        """
        w = np.asarray(w, dtype=np.float64)
        if self.kind == self.SCALED_IDENTITY:
            return np.sqrt(self.variance) * w
        if self.kind == self.DIAGONAL:
            return np.sqrt(self.variances) * w
        return w @ self.chol.T

    def sqrt_matrix(self) -> np.ndarray:
        if self.kind == self.SCALED_IDENTITY:
            return np.sqrt(self.variance) * np.eye(self.dim)
        if self.kind == self.DIAGONAL:
            return np.diag(np.sqrt(self.variances))
        return np.array(self.chol)

    def as_matrix(self) -> np.ndarray:
        if self.kind == self.SCALED_IDENTITY:
            return self.variance * np.eye(self.dim)
        if self.kind == self.DIAGONAL:
            return np.diag(self.variances)
        return np.array(self.sigma)


def gaussian_sample(rng: np.random.Generator, cov: CovModel, size: int | None = None) -> np.ndarray:
    """Draw N(0, cov); a single vector, or a (size, dim) batch."""
    shape = (cov.dim,) if size is None else (size, cov.dim)
    return cov.sqrt_apply(rng.standard_normal(shape))


def tau_inflation(tau: float) -> float:
    """Variance inflation of the test pseudo-measurement: (1 + tau^2) / tau^2."""
    if tau <= 0:
        raise ConfigError("tau must be positive")
    return (1.0 + tau * tau) / (tau * tau)


@dataclass(frozen=True)
class UnitEmbedding:
    """Point on the d-dimensional unit hypersphere."""

    v: np.ndarray

    def __post_init__(self):
        v = _as_vector(self.v, "embedding")
        if v.size < 2:
            raise ConfigError("embeddings must have dimension >= 2")
        norm = float(np.linalg.norm(v))
        if abs(norm - 1.0) > _UNIT_NORM_TOL:
            raise ConfigError(f"embedding norm {norm} deviates from 1 beyond 1e-6")
        object.__setattr__(self, "v", v)

    @classmethod
    def normalized(cls, v) -> "UnitEmbedding":
        v = np.asarray(v, dtype=np.float64)
        norm = np.linalg.norm(v)
        if norm <= 0:
            raise ConfigError("cannot normalize a zero vector")
        return cls(v / norm)

    @property
    def dim(self) -> int:
        return self.v.size

    def dot(self, other: "UnitEmbedding") -> float:
        if self.dim != other.dim:
            raise DimensionMismatchError(
                f"embedding dims differ: {self.dim} vs {other.dim}"
            )
        return float(self.v @ other.v)


@dataclass(frozen=True)
class HypothesisPair:
    """Null and alternative propositions as unit embeddings, labels are metadata."""

    q0: UnitEmbedding
    q1: UnitEmbedding
    label0: str = ""
    label1: str = ""

    def __post_init__(self):
        if self.q0.dim != self.q1.dim:
            raise DimensionMismatchError(
                f"hypothesis dims differ: {self.q0.dim} vs {self.q1.dim}"
            )

    @property
    def delta_q(self) -> np.ndarray:
        return self.q0.v - self.q1.v

    @property
    def dim(self) -> int:
        return self.q0.dim
