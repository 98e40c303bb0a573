"""Figure pipeline for the DRAM-throttling simulator's CSV outputs."""

from .figures import FIGURE_KINDS, FigureError, FigureSpec, build_figure, render

__version__ = "0.1.0"
