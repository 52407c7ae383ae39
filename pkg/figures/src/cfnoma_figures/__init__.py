"""Static figure rendering for cfnoma experiment CSVs."""

from .render import (FigureSpec, NoDataError, SchemaError, cdf_series,
                     empirical_cdf, read_rows, render, series_for_error,
                     series_for_sweep)

__version__ = "0.1.0"
