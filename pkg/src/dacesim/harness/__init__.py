"""Monte Carlo engine, sweeps, CSV output and the command-line interface."""

from .config import ALL_SCHEMES, SimConfig, parse_mimo, parse_range
from .engine import SchemeSums, run_trials
from .records import CSV_COLUMNS, MetricRecord, read_csv, to_csv, write_csv
from .sweeps import (ccdf_papr_samples, run_ber_sweep, run_ccdf, run_complexity_probe,
                     run_mse_sweep, run_success_rate)

__all__ = [
    "ALL_SCHEMES", "CSV_COLUMNS", "MetricRecord", "SchemeSums", "SimConfig",
    "ccdf_papr_samples", "parse_mimo", "parse_range", "read_csv", "run_ber_sweep", "run_ccdf",
    "run_complexity_probe", "run_mse_sweep", "run_success_rate", "run_trials", "to_csv",
    "write_csv",
]
