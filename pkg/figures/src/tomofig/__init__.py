"""Batch rendering of tomography-experiment summary CSVs into figures."""

from .render import FigureSpec, RenderError, RenderReport, render

__version__ = "0.1.0"
