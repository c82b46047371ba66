"""Encoders, estimators, and group actions.

Encoders map images (or stored ids) to unit embeddings.  Estimators map
measurements back to images; the affine MMSE estimator exposes its exact
Jacobian, which the power analysis relies on.  Group actions provide the
symmetries used by the equivariant bootstrap.
"""

from __future__ import annotations

import os
import subprocess
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    DimensionMismatchError,
    ExternalProcessError,
    UnknownIdError,
    ZeroImageEmbeddingError,
)
from .tensorio import read_tensor, write_tensor
from .types import CovModel, ForwardModel, ImageVec, MeasurementVec, UnitEmbedding

_ZERO_TOL = 1e-12


@dataclass(frozen=True)
class LinearSphereEncoder:
    """phi(x) = Phi x / ||Phi x||: a linear map projected on the sphere."""

    phi: np.ndarray

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=np.float64)
        if phi.ndim != 2 or phi.shape[0] < 2:
            raise ConfigError("encoder matrix must be 2-D with d >= 2 rows")
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)

    @property
    def d(self) -> int:
        return self.phi.shape[0]

    @property
    def n(self) -> int:
        return self.phi.shape[1]

    def encode(self, x) -> UnitEmbedding:
        vec = x.data if isinstance(x, ImageVec) else np.asarray(x, dtype=np.float64)
        if vec.size != self.n:
            raise DimensionMismatchError(
                f"encoder expects length {self.n}, got {vec.size}"
            )
        proj = self.phi @ vec
        norm = np.linalg.norm(proj)
        if norm <= _ZERO_TOL:
            raise ZeroImageEmbeddingError("image lies in the encoder null space")
        return UnitEmbedding(proj / norm)

    def encode_batch(self, xs: np.ndarray) -> np.ndarray:
        """Rows of ``xs`` to rows of unit vectors; raises on any zero projection."""
        proj = xs @ self.phi.T
        norms = np.linalg.norm(proj, axis=-1, keepdims=True)
        if np.any(norms <= _ZERO_TOL):
            raise ZeroImageEmbeddingError("a batch image lies in the encoder null space")
        return proj / norms


@dataclass(frozen=True)
class StoredEncoder:
    """Lookup table of precomputed embeddings, keyed by id."""

    table: dict

    def encode(self, key: str) -> UnitEmbedding:
        try:
            return self.table[key]
        except KeyError:
            raise UnknownIdError(f"no embedding for id {key!r}") from None


SphereEncoder = LinearSphereEncoder | StoredEncoder


def encode(encoder, x) -> UnitEmbedding:
    return encoder.encode(x)


@dataclass(frozen=True)
class IdentityEstimator:
    def estimate(self, y: MeasurementVec) -> ImageVec:
        return ImageVec(y.data)


@dataclass(frozen=True)
class AffineEstimator:
    """x_hat(y) = b + B y, with Jacobian dx_hat/dy = B exactly."""

    b: np.ndarray
    gain: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.b, dtype=np.float64)
        gain = np.asarray(self.gain, dtype=np.float64)
        if gain.ndim != 2 or b.ndim != 1 or gain.shape[0] != b.size:
            raise ConfigError("affine estimator needs b (n,) and gain (n, m)")
        b.setflags(write=False)
        gain.setflags(write=False)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "gain", gain)

    def estimate(self, y: MeasurementVec) -> ImageVec:
        if y.m != self.gain.shape[1]:
            raise DimensionMismatchError(
                f"estimator expects m={self.gain.shape[1]}, got {y.m}"
            )
        return ImageVec(self.b + self.gain @ y.data)

    def estimate_batch(self, ys: np.ndarray) -> np.ndarray:
        return self.b + ys @ self.gain.T


@dataclass(frozen=True)
class ExternalEstimator:
    """Synchronous file-exchange protocol with an external command.

    The command gets ETEST_IO_DIR in its environment, reads
    ``$ETEST_IO_DIR/in.emt`` and must write ``$ETEST_IO_DIR/out.emt``
    and exit 0.
    """

    command: str
    workdir: str | None = None
    timeout: float = 300.0

    def estimate(self, y: MeasurementVec) -> ImageVec:
        with tempfile.TemporaryDirectory(dir=self.workdir) as io_dir:
            write_tensor(os.path.join(io_dir, "in.emt"), y.data)
            env = dict(os.environ, ETEST_IO_DIR=io_dir)
            try:
                proc = subprocess.run(
                    self.command,
                    shell=True,
                    env=env,
                    cwd=io_dir,
                    capture_output=True,
                    timeout=self.timeout,
                )
            except subprocess.TimeoutExpired as exc:
                raise ExternalProcessError(
                    f"external estimator timed out after {self.timeout}s"
                ) from exc
            if proc.returncode != 0:
                raise ExternalProcessError(
                    f"external estimator exited {proc.returncode}: "
                    f"{proc.stderr.decode(errors='replace')[-500:]}"
                )
            out_path = os.path.join(io_dir, "out.emt")
            if not os.path.exists(out_path):
                raise ExternalProcessError("external estimator wrote no out.emt")
            try:
                data = read_tensor(out_path)
            except Exception as exc:
                raise ExternalProcessError(f"invalid output tensor: {exc}") from exc
            return ImageVec(np.asarray(data, dtype=np.float64).ravel())


Estimator = IdentityEstimator | AffineEstimator | ExternalEstimator


def estimate(estimator, y: MeasurementVec) -> ImageVec:
    return estimator.estimate(y)


def affine_mmse(
    forward: ForwardModel,
    noise_cov: CovModel,
    prior_mean: ImageVec,
    prior_cov: CovModel,
) -> AffineEstimator:
    """Gaussian posterior-mean estimator for a linear forward model.

    B = C A^T (A C A^T + Sigma)^-1 and b = mu - B A mu, where C is the prior
    covariance and Sigma the (possibly inflated) noise covariance.
    """
    a = forward.as_matrix()
    c = prior_cov.as_matrix()
    sigma = noise_cov.as_matrix()
    if a.shape[1] != prior_mean.n or a.shape[0] != sigma.shape[0]:
        raise DimensionMismatchError("forward model, prior and noise dims disagree")
    gram = a @ c @ a.T + sigma
    try:
        gain = np.linalg.solve(gram.T, (a @ c.T)).T
    except np.linalg.LinAlgError as exc:
        raise ConfigError(f"singular system matrix in MMSE estimator: {exc}") from exc
    b = prior_mean.data - gain @ (a @ prior_mean.data)
    return AffineEstimator(b=b, gain=gain)


@dataclass(frozen=True)
class CyclicShift2D:
    """Cyclic pixel translations of an image grid; an exact group action."""

    max_dx: int
    max_dy: int

    def __post_init__(self):
        if self.max_dx < 0 or self.max_dy < 0:
            raise ConfigError("shift bounds must be non-negative")

    def sample_params(self, rng: np.random.Generator) -> tuple[int, int]:
        dx = int(rng.integers(-self.max_dx, self.max_dx + 1))
        dy = int(rng.integers(-self.max_dy, self.max_dy + 1))
        return dx, dy

    def _shift(self, x: ImageVec, dx: int, dy: int) -> ImageVec:
        if x.shape is None:
            raise ConfigError("group action requires image shape metadata")
        if abs(dx) > self.max_dx or abs(dy) > self.max_dy:
            raise ConfigError("shift exceeds configured bounds")
        grid = np.roll(x.as_grid(), shift=(dy, dx), axis=(0, 1))
        return ImageVec(grid.ravel(), shape=x.shape)

    def apply(self, params: tuple[int, int], x: ImageVec) -> ImageVec:
        dx, dy = params
        return self._shift(x, dx, dy)

    def invert(self, params: tuple[int, int], x: ImageVec) -> ImageVec:
        dx, dy = params
        return self._shift(x, -dx, -dy)


GroupAction = CyclicShift2D


def apply_group(group, params, x: ImageVec) -> ImageVec:
    return group.apply(params, x)


def invert_group(group, params, x: ImageVec) -> ImageVec:
    return group.invert(params, x)
