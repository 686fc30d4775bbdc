"""Chart rendering for bandit experiment summary CSVs."""

__version__ = "0.1.0"

from .render import EXPECTED_HEADER, STYLE_VERSION, PlotSpec, PlotSpecError, read_summary, render, render_file

__all__ = [
    "EXPECTED_HEADER",
    "STYLE_VERSION",
    "PlotSpec",
    "PlotSpecError",
    "read_summary",
    "render",
    "render_file",
]
