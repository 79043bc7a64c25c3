"""Read-only figure renderer for holeflow reports."""

from .render import FIGURE_KINDS, FigureSpec, SchemaError, render, slope_label

__all__ = ["FIGURE_KINDS", "FigureSpec", "SchemaError", "render", "slope_label"]
