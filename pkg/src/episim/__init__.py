"""Spatial agent-based SIRD epidemic simulator with NPI controls,
univariate sweeps and Morris elementary-effects sensitivity analysis."""

from episim.config import (
    ConfigError,
    DiseaseParams,
    InterventionParams,
    SimConfig,
    desk_config,
    load_config,
)
from episim.engine import HealthState, TimeSeries, World, init_world, run_simulation
from episim.scenario import Scenario, TimelineEvent, load_scenario, run_scenario

__all__ = [
    "ConfigError",
    "DiseaseParams",
    "HealthState",
    "InterventionParams",
    "Scenario",
    "SimConfig",
    "TimeSeries",
    "TimelineEvent",
    "World",
    "desk_config",
    "init_world",
    "load_config",
    "load_scenario",
    "run_scenario",
    "run_simulation",
]

__version__ = "0.1.0"
