"""Publication-style figures and markdown tables from simulation results CSVs.

This package consumes only the results CSV contract (the fixed header
written by the simulator) and never touches simulator internals.
"""

__version__ = "0.1.0"

from .data import REQUIRED_COLUMNS, ResultsData, SchemaError, load_results
from .charts import PlotSpec, plot_metric_vs_n
from .tables import table_summary

__all__ = ["REQUIRED_COLUMNS", "ResultsData", "SchemaError", "load_results",
           "PlotSpec", "plot_metric_vs_n", "table_summary"]
