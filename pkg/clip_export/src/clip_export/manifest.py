"""Export manifest: which items to encode, with which model, to which file.

Manifest JSON:
    {
      "schema": "export-manifest-v1",
      "model_name": "seeded:demo-256",
      "model_hash": "<optional sha256 pin>",
      "output_path": "emb.json",
      "items": [
        {"id": "img00", "kind": "image", "source_path": "images/img00.png"},
        {"id": "q0", "kind": "text", "prompt_text": "This is a photo of a daisy"}
      ]
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import IdCollisionError, ManifestError

SCHEMA = "export-manifest-v1"

KIND_IMAGE = "image"
KIND_TEXT = "text"

_ITEM_KEYS = {"id", "kind", "source_path", "prompt_text"}
_DOC_KEYS = {"schema", "model_name", "model_hash", "output_path", "items"}


@dataclass(frozen=True)
class ManifestItem:
    id: str
    kind: str
    source_path: str | None = None
    prompt_text: str | None = None

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise ManifestError("item id must be a non-empty string")
        if self.kind == KIND_IMAGE:
            if not self.source_path:
                raise ManifestError(f"image item {self.id!r} needs a source_path")
            if self.prompt_text is not None:
                raise ManifestError(f"image item {self.id!r} must not carry prompt_text")
        elif self.kind == KIND_TEXT:
            if not self.prompt_text:
                raise ManifestError(f"text item {self.id!r} needs a non-empty prompt_text")
            if self.source_path is not None:
                raise ManifestError(f"text item {self.id!r} must not carry source_path")
        else:
            raise ManifestError(f"item {self.id!r} has unknown kind {self.kind!r}")


@dataclass(frozen=True)
class ExportManifest:
    items: tuple[ManifestItem, ...]
    model_name: str
    output_path: str | None = None
    model_hash: str | None = None
    base_dir: Path = field(default_factory=Path)

    def __post_init__(self):
        if not isinstance(self.model_name, str) or not self.model_name:
            raise ManifestError("model_name must be a non-empty string")
        if not self.items:
            raise ManifestError("manifest has no items")
        seen: set[str] = set()
        for item in self.items:
            if item.id in seen:
                raise IdCollisionError(f"duplicate item id {item.id!r}")
            seen.add(item.id)

    def resolve_source(self, item: ManifestItem) -> Path:
        return self.base_dir / item.source_path


def load_manifest(path) -> ExportManifest:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"{path}: cannot read manifest: {exc}") from exc
    if not isinstance(doc, dict):
        raise ManifestError(f"{path}: manifest must be a JSON object")
    if doc.get("schema") != SCHEMA:
        raise ManifestError(f"{path}: expected schema {SCHEMA!r}, got {doc.get('schema')!r}")
    unknown = set(doc) - _DOC_KEYS
    if unknown:
        raise ManifestError(f"{path}: unknown manifest keys {sorted(unknown)}")
    raw_items = doc.get("items")
    if not isinstance(raw_items, list):
        raise ManifestError(f"{path}: items must be a list")
    items = []
    for raw in raw_items:
        if not isinstance(raw, dict):
            raise ManifestError(f"{path}: every item must be an object")
        unknown = set(raw) - _ITEM_KEYS
        if unknown:
            raise ManifestError(f"{path}: unknown item keys {sorted(unknown)}")
        items.append(ManifestItem(
            id=raw.get("id"),
            kind=raw.get("kind"),
            source_path=raw.get("source_path"),
            prompt_text=raw.get("prompt_text"),
        ))
    return ExportManifest(
        items=tuple(items),
        model_name=doc.get("model_name"),
        output_path=doc.get("output_path"),
        model_hash=doc.get("model_hash"),
        base_dir=path.parent,
    )
