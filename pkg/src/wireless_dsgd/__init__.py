"""Decentralized SGD over wireless device-to-device networks.

Digital (coloring schedule, quantized packets with error feedback) and
analog (star-center AirComp with sparse recovery) consensus protocols,
plus ideal, TDMA and no-communication baselines.
"""
from .errors import (ConfigurationError, FormatError, NumericError, PartitionError,
                     ScheduleError, SimulationError, TopologyError)
from .harness import ExperimentConfig, run_experiment

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError", "ExperimentConfig", "FormatError", "NumericError",
    "PartitionError", "ScheduleError", "SimulationError", "TopologyError",
    "run_experiment",
]
