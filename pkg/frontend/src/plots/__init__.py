"""Offline figure generation for curvlab run artifacts."""

from .figures import (Annotation, FigureSpec, FigureSpecError,
                      MissingColumnError, RenderResult, SeriesSpec,
                      load_figure_spec, render)

__version__ = "0.1.0"

__all__ = ["Annotation", "FigureSpec", "FigureSpecError", "MissingColumnError",
           "RenderResult", "SeriesSpec", "load_figure_spec", "render"]
