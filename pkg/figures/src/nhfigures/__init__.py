"""Figure regeneration from nhthermo CSV outputs."""

__version__ = "0.1.0"

from .render import FigureJob, SchemaError, plot_spec, render  # noqa: F401
