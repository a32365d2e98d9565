"""Monte Carlo simulator for the accuracy and equity of nearest-instrument
air quality reporting over gridded daily PM2.5 fields."""

__version__ = "0.1.0"

from .aqi import AqiClass, DEFAULT_PM25_BREAKPOINTS, classify, is_healthy, misclass
from .core import (Grid, GridCell, Point, SubgroupMasks, SynthFieldConfig,
                   TruePm25Field, compute_quintile_masks, descriptive_stats,
                   generate_synthetic_field)
from .errors import (Differential, EmpiricalDecile, ErrorModel, NoError,
                     NonDifferential, ResidualTable, decile_index,
                     simulate_measurement, simulate_measurements)
from .experiment import (ExperimentInputs, Scenario, SweepSpec, run_experiment,
                         run_sweep, run_trial)
from .placement import (PlacementResult, PurpleAirPool, SchoolPool, WeightedBy,
                        select_sites, weighted_sample_without_replacement)

__all__ = [
    "AqiClass", "DEFAULT_PM25_BREAKPOINTS", "classify", "is_healthy", "misclass",
    "Grid", "GridCell", "Point", "SubgroupMasks", "SynthFieldConfig", "TruePm25Field",
    "compute_quintile_masks", "descriptive_stats", "generate_synthetic_field",
    "Differential", "EmpiricalDecile", "ErrorModel", "NoError", "NonDifferential",
    "ResidualTable", "decile_index", "simulate_measurement", "simulate_measurements",
    "ExperimentInputs", "Scenario", "SweepSpec", "run_experiment", "run_sweep",
    "run_trial",
    "PlacementResult", "PurpleAirPool", "SchoolPool", "WeightedBy", "select_sites",
    "weighted_sample_without_replacement",
]
