from .documents import SchemaError, load_document, validate_bumpline, validate_spec_chart
from .render import render_bumpline, render_spec_chart

__version__ = "0.1.0"

__all__ = [
    "SchemaError",
    "load_document",
    "validate_bumpline",
    "validate_spec_chart",
    "render_bumpline",
    "render_spec_chart",
]
