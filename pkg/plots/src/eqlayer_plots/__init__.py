"""Post-processing plots for eqlayer solver outputs.

Consumes only the documented CSV/coordinate file contracts; the solver
suite runs without this package installed.
"""

from .io import SchemaError, read_coordinate_matrix, read_delimited
from .render import PLOT_KINDS, render

__version__ = "0.1.0"

__all__ = ["PLOT_KINDS", "SchemaError", "read_coordinate_matrix",
           "read_delimited", "render"]
