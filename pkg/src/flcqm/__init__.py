"""Fuzzy-logic QoS management for wireless sensor/actuator networks.

A deterministic discrete-event simulator of sources sharing one CSMA/CA
channel, with per-source fuzzy controllers that adapt sampling periods to
hold the end-to-end deadline miss ratio at a setpoint.
"""

from .fuzzy import FuzzyController, controller_step, default_controller, surface_sample
from .qos import QosManagerState, compute_dmr, initial_state, on_interval_end
from .scenario import ScenarioSpec, build_paper_scenario, compare, run_scheme
from .simulator import Simulation

__all__ = [
    "FuzzyController",
    "QosManagerState",
    "ScenarioSpec",
    "Simulation",
    "build_paper_scenario",
    "compare",
    "compute_dmr",
    "controller_step",
    "default_controller",
    "initial_state",
    "on_interval_end",
    "run_scheme",
    "surface_sample",
]

__version__ = "0.1.0"
