"""fleetstation: a multi-robot ground station.

Deterministic 2D fleet simulation, per-robot occupancy mapping, map
merging, navigation, whitelisted topic replication, and an operator
gateway with a TCP wire protocol.
"""

__version__ = "0.1.0"

from .errors import FleetStationError
from .geometry import GridIndex, Pose2D, Transform2D, Twist2D
from .runner import RunRecord, System, run_headless
from .scenario import Scenario, load_scenario, save_scenario

__all__ = [
    "FleetStationError",
    "GridIndex",
    "Pose2D",
    "RunRecord",
    "Scenario",
    "System",
    "Transform2D",
    "Twist2D",
    "__version__",
    "load_scenario",
    "run_headless",
    "save_scenario",
]
