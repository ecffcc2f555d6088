"""Cooperative transport of a cable-suspended payload by a quadcopter fleet.

Followers track a homogeneous deformation defined by three leaders; each
vehicle is stabilized about its desired trajectory by an LQG regulator.
"""

from .config import ScenarioConfig, hover_scenario, load, loads, canonical_scenario
from .engine import Simulation, Trace, run
from .errors import CDTransportError, ConfigError, SimulationAbort

__all__ = [
    "CDTransportError", "ConfigError", "ScenarioConfig", "Simulation", "SimulationAbort",
    "Trace", "hover_scenario", "load", "loads", "canonical_scenario", "run",
]
