"""Contextual vector export into the CTXV1 interchange format."""

__version__ = "0.1.0"

from .export import (  # noqa: F401
    ExportJob,
    ModelLoadError,
    TokenizationMismatch,
    export_context_vectors,
    export_static_vectors,
)
