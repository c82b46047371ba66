"""Portable file formats.

EMT1 binary tensor (little-endian):
    magic "EMT1" | dtype u8 (1=f32, 2=f64) | ndim u8 | ndim x u32 dims |
    row-major payload.

EMB1 embedding table (UTF-8 JSON):
    {"format": "EMB1", "dim": d, "items": [{"id": str, "v": [d numbers]}, ...]}
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import (
    BadDtypeError,
    BadMagicError,
    ConfigError,
    DimensionMismatchError,
    NormOutOfToleranceError,
    TruncatedFileError,
)
from .types import UnitEmbedding

_MAGIC = b"EMT1"
_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_CODES = {np.dtype("float32"): 1, np.dtype("float64"): 2}

_EMB_NORM_TOL = 1e-3


def write_tensor(path, tensor: np.ndarray) -> None:
    arr = np.asarray(tensor)
    if arr.dtype not in _CODES:
        arr = arr.astype(np.float64)
    code = _CODES[arr.dtype]
    if arr.ndim > 255:
        raise ConfigError("too many dimensions for EMT1")
    header = _MAGIC + struct.pack("<BB", code, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    payload = np.ascontiguousarray(arr).astype(_DTYPES[code], copy=False).tobytes()
    Path(path).write_bytes(header + payload)


def read_tensor(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 6:
        raise TruncatedFileError(f"{path}: file shorter than EMT1 header")
    if raw[:4] != _MAGIC:
        raise BadMagicError(f"{path}: bad magic {raw[:4]!r}")
    code, ndim = struct.unpack_from("<BB", raw, 4)
    if code not in _DTYPES:
        raise BadDtypeError(f"{path}: unknown dtype code {code}")
    offset = 6
    if len(raw) < offset + 4 * ndim:
        raise TruncatedFileError(f"{path}: truncated dimension list")
    dims = struct.unpack_from(f"<{ndim}I", raw, offset)
    offset += 4 * ndim
    dtype = _DTYPES[code]
    count = int(np.prod(dims)) if ndim else 1
    expected = offset + count * dtype.itemsize
    if len(raw) < expected:
        raise TruncatedFileError(
            f"{path}: payload has {len(raw) - offset} bytes, expected {count * dtype.itemsize}"
        )
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
    return data.reshape(dims).copy()


def write_embeddings(path, embeddings: dict[str, UnitEmbedding]) -> None:
    if not embeddings:
        raise ConfigError("embedding table is empty")
    dims = {e.dim for e in embeddings.values()}
    if len(dims) != 1:
        raise DimensionMismatchError(f"mixed embedding dimensions: {sorted(dims)}")
    doc = {
        "format": "EMB1",
        "dim": dims.pop(),
        "items": [
            {"id": key, "v": [float(x) for x in emb.v]}
            for key, emb in embeddings.items()
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def read_embeddings(path) -> dict[str, UnitEmbedding]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != "EMB1":
        raise ConfigError(f"{path}: not an EMB1 document")
    dim = int(doc["dim"])
    out: dict[str, UnitEmbedding] = {}
    for item in doc["items"]:
        key = item["id"]
        v = np.asarray(item["v"], dtype=np.float64)
        if v.size != dim:
            raise DimensionMismatchError(
                f"{path}: entry {key!r} has dim {v.size}, expected {dim}"
            )
        norm = float(np.linalg.norm(v))
        if abs(norm - 1.0) > _EMB_NORM_TOL:
            raise NormOutOfToleranceError(
                f"{path}: entry {key!r} has norm {norm}; exporter did not normalize"
            )
        if key in out:
            raise ConfigError(f"{path}: duplicate id {key!r}")
        out[key] = UnitEmbedding(v / norm)
    return out
