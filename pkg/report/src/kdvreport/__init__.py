"""Markdown and figure reports for kdvdamp simulation outputs."""

__version__ = "0.1.0"

from .render import ReportBundle, SchemaError, render

__all__ = ["ReportBundle", "SchemaError", "render", "__version__"]
