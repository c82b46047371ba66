"""Embedding model backends.

Two backends share one interface (name, content_hash, dim, embed_image,
embed_text):

- seeded projection: a deterministic stand-in model addressed as
  "seeded:<tag>[@<dim>]". Images are resized to 32x32 RGB and text is hashed
  into byte n-gram counts; both feature vectors pass through a fixed random
  projection whose seed derives from the model name. Fully offline and
  byte-reproducible, which is what calibrated temperatures require.
- hf-clip: any other name loads a local CLIP checkpoint through transformers.
  The parameter tensors are hashed so the manifest can pin the exact weights.

Both produce L2-normalized float64 vectors.
"""

from __future__ import annotations

import hashlib

import numpy as np
from PIL import Image

from .errors import ModelLoadError

SEEDED_PREFIX = "seeded:"

_PATCH = 32
_FEATURE_DIM = _PATCH * _PATCH * 3
_DEFAULT_DIM = 256


def _name_digest(text: str) -> int:
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest(), "little")


class SeededProjectionBackend:
    """Deterministic projection model; no weights on disk, no network."""

    def __init__(self, name: str):
        if not name.startswith(SEEDED_PREFIX):
            raise ModelLoadError(f"not a seeded model name: {name!r}")
        tag = name[len(SEEDED_PREFIX):]
        dim = _DEFAULT_DIM
        if "@" in tag:
            tag, _, dim_text = tag.rpartition("@")
            try:
                dim = int(dim_text)
            except ValueError:
                raise ModelLoadError(f"bad embedding dim in model name {name!r}") from None
        if not tag or dim <= 0:
            raise ModelLoadError(f"bad seeded model name {name!r}")
        self.name = name
        self.dim = dim
        seed = np.random.SeedSequence(entropy=_name_digest(f"seeded-projection/{tag}/{dim}"))
        rng = np.random.Generator(np.random.Philox(seed))
        self._w = rng.standard_normal((dim, _FEATURE_DIM)) / np.sqrt(_FEATURE_DIM)
        self.content_hash = hashlib.sha256(
            name.encode("utf-8") + b"\x00" + self._w.tobytes()
        ).hexdigest()

    def _project(self, features: np.ndarray, what: str) -> np.ndarray:
        vec = self._w @ features
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise ModelLoadError(f"{what} produced a zero feature vector")
        return vec / norm

    def embed_image(self, image: Image.Image) -> np.ndarray:
        small = image.convert("RGB").resize((_PATCH, _PATCH), Image.BILINEAR)
        pixels = np.asarray(small, dtype=np.float64).ravel() / 255.0
        return self._project(pixels - 0.5, "image")

    def embed_text(self, prompt: str) -> np.ndarray:
        data = prompt.encode("utf-8")
        features = np.zeros(_FEATURE_DIM)
        for width in (1, 2, 3):
            for start in range(len(data) - width + 1):
                gram = data[start:start + width]
                bucket = _name_digest(f"gram/{width}/") ^ _name_digest(gram.hex())
                features[bucket % _FEATURE_DIM] += 1.0 / width
        return self._project(features, f"prompt {prompt!r}")


class HFClipBackend:
    """CLIP checkpoint loaded by name through transformers (local cache only)."""

    def __init__(self, name: str):
        try:
            import torch
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise ModelLoadError(f"transformers backend unavailable: {exc}") from exc
        try:
            self._model = CLIPModel.from_pretrained(name)
            self._processor = CLIPProcessor.from_pretrained(name)
        except Exception as exc:
            raise ModelLoadError(f"cannot load CLIP checkpoint {name!r}: {exc}") from exc
        self._model.eval()
        self._torch = torch
        self.name = name
        self.dim = int(self._model.config.projection_dim)
        digest = hashlib.sha256()
        for key, tensor in sorted(self._model.state_dict().items()):
            digest.update(key.encode("utf-8"))
            digest.update(tensor.detach().cpu().numpy().tobytes())
        self.content_hash = digest.hexdigest()

    def _normalized(self, tensor) -> np.ndarray:
        vec = tensor[0].detach().cpu().numpy().astype(np.float64)
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise ModelLoadError("model produced a zero embedding")
        return vec / norm

    def embed_image(self, image: Image.Image) -> np.ndarray:
        inputs = self._processor(images=image.convert("RGB"), return_tensors="pt")
        with self._torch.no_grad():
            out = self._model.get_image_features(**inputs)
        return self._normalized(out)

    def embed_text(self, prompt: str) -> np.ndarray:
        inputs = self._processor(text=[prompt], return_tensors="pt", padding=True)
        with self._torch.no_grad():
            out = self._model.get_text_features(**inputs)
        return self._normalized(out)


def load_backend(model_name: str, pinned_hash: str | None = None):
    if model_name.startswith(SEEDED_PREFIX):
        backend = SeededProjectionBackend(model_name)
    else:
        backend = HFClipBackend(model_name)
    if pinned_hash is not None and pinned_hash != backend.content_hash:
        raise ModelLoadError(
            f"model {model_name!r} hash {backend.content_hash} does not match "
            f"manifest pin {pinned_hash}"
        )
    return backend
