"""Offline image/text embedding exporter producing EMB1 tables and EMT1 tensors."""

from .errors import (
    ClipExportError,
    IdCollisionError,
    ImageDecodeError,
    ManifestError,
    ModelLoadError,
)
from .export import ExportResult, export
from .manifest import ExportManifest, ManifestItem, load_manifest

__all__ = [
    "ClipExportError",
    "ExportManifest",
    "ExportResult",
    "IdCollisionError",
    "ImageDecodeError",
    "ManifestError",
    "ManifestItem",
    "ModelLoadError",
    "export",
    "load_manifest",
]
