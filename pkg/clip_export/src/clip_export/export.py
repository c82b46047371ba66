"""Export pipeline: manifest in, EMB1 table (and optional EMT1 dumps) out."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .backends import load_backend
from .errors import ImageDecodeError, ManifestError
from .formats import write_embedding_table, write_image_tensor
from .manifest import KIND_IMAGE, ExportManifest

NORM_TOL = 1e-6


@dataclass(frozen=True)
class ExportResult:
    output_path: Path
    ids: tuple[str, ...]
    dim: int
    model_name: str
    model_hash: str


def _decode_image(path: Path) -> Image.Image:
    try:
        with Image.open(path) as img:
            img.load()
            return img.convert("RGB")
    except (OSError, UnidentifiedImageError, ValueError) as exc:
        raise ImageDecodeError(f"{path}: cannot decode image: {exc}") from exc


def _unit(vec: np.ndarray, item_id: str) -> np.ndarray:
    unit = vec / np.linalg.norm(vec)
    if abs(float(np.linalg.norm(unit)) - 1.0) > NORM_TOL:
        raise ManifestError(f"embedding for {item_id!r} failed normalization")
    return unit


def export(manifest: ExportManifest, out_path=None, image_dump_dir=None) -> ExportResult:
    if out_path is not None:
        out = Path(out_path)
    elif manifest.output_path is not None:
        out = manifest.base_dir / manifest.output_path
    else:
        raise ManifestError("no output path: set output_path in the manifest or pass one")

    backend = load_backend(manifest.model_name, manifest.model_hash)
    dump_dir = Path(image_dump_dir) if image_dump_dir is not None else None
    if dump_dir is not None:
        dump_dir.mkdir(parents=True, exist_ok=True)

    items: list[tuple[str, np.ndarray]] = []
    prompts: dict[str, str] = {}
    for item in manifest.items:
        if item.kind == KIND_IMAGE:
            image = _decode_image(manifest.resolve_source(item))
            vec = backend.embed_image(image)
            if dump_dir is not None:
                pixels = np.asarray(image, dtype=np.float32) / 255.0
                write_image_tensor(dump_dir / f"{item.id}.emt", pixels)
        else:
            vec = backend.embed_text(item.prompt_text)
            prompts[item.id] = item.prompt_text
        items.append((item.id, _unit(vec, item.id)))

    metadata = {
        "model_name": backend.name,
        "model_hash": backend.content_hash,
        "prompts": prompts,
    }
    write_embedding_table(out, backend.dim, items, metadata)
    return ExportResult(
        output_path=out,
        ids=tuple(key for key, _ in items),
        dim=backend.dim,
        model_name=backend.name,
        model_hash=backend.content_hash,
    )
