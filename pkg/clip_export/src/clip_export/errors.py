"""Exception hierarchy for the exporter."""


class ClipExportError(Exception):
    """Base class for all exporter errors."""


class ManifestError(ClipExportError):
    """Malformed or inconsistent export manifest."""


class IdCollisionError(ClipExportError):
    """Two manifest items share the same id."""


class ImageDecodeError(ClipExportError):
    """An image source could not be decoded."""


class ModelLoadError(ClipExportError):
    """The embedding model could not be loaded or failed its pinned hash."""
