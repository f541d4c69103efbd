"""Run configuration, artifacts, sweeps and the command line interface."""
from .config import SCHEMA_VERSION, GridSpec, RunConfig, load_config, parse_config
from .io import read_report, read_series_csv, read_snapshot, snapshot_state
from .sweep import SweepSpec, load_sweep, run_sweep

__all__ = ["SCHEMA_VERSION", "GridSpec", "RunConfig", "load_config", "parse_config",
           "read_report", "read_series_csv", "read_snapshot", "snapshot_state",
           "SweepSpec", "load_sweep", "run_sweep"]
