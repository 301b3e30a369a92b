"""Discrete-event simulation of MIPv6 vertical handover (hard vs. soft)."""

from .engine import Simulator
from .harness import (MetricsRecord, ScenarioConfig, emit_csv, load_scenario,
                      run_experiment, sweep)
from .scenario import Scenario

__version__ = "0.1.0"

__all__ = ["Simulator", "Scenario", "ScenarioConfig", "MetricsRecord",
           "load_scenario", "run_experiment", "sweep", "emit_csv",
           "__version__"]
