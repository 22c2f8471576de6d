"""Column schemas of the emitted figure data."""

from .figure_schemas import FIGURE_DATA_INFO, get_figure_schema

__all__ = ["FIGURE_DATA_INFO", "get_figure_schema"]
