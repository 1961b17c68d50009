"""Figure rendering for eecdma experiment CSV outputs."""

from .render import FIGURES, PlotSpec, SchemaError, build_figure, render

__version__ = "0.1.0"
