"""Render phonon-inverse experiment CSVs into publication-style figures."""

__version__ = "0.1.0"

from .render import FigureJob, render

__all__ = ["FigureJob", "render", "__version__"]
