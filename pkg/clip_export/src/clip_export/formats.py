"""Writers for the toolkit's portable file formats.

EMT1 binary tensor (little-endian):
    magic "EMT1" | dtype u8 (1=f32, 2=f64) | ndim u8 | ndim x u32 dims |
    row-major payload.

EMB1 embedding table (UTF-8 JSON):
    {"format": "EMB1", "dim": d, "items": [{"id": str, "v": [d numbers]}, ...]}
    plus a "metadata" object readers are free to ignore.

These formats are the exporter's only coupling to the testing toolkit, so the
writers live here rather than being imported from it.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

_MAGIC = b"EMT1"
_F32, _F64 = 1, 2


def write_image_tensor(path, pixels: np.ndarray) -> None:
    arr = np.ascontiguousarray(pixels, dtype=np.float32)
    header = _MAGIC + struct.pack("<BB", _F32, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    Path(path).write_bytes(header + arr.tobytes())


def write_embedding_table(path, dim: int, items: list[tuple[str, np.ndarray]],
                          metadata: dict) -> None:
    doc = {
        "format": "EMB1",
        "dim": int(dim),
        "items": [
            {"id": key, "v": [float(x) for x in vec]}
            for key, vec in items
        ],
        "metadata": metadata,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
