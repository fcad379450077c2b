"""Deterministic simulator of peer-to-peer file sharing over named-data
networking: forwarding plane, adaptive multipath strategy, swarm apps,
and a scenario harness."""

__version__ = "0.1.0"

from .packets import Data, Interest, Nack, NackReason, Name, name_from_uri
from .simnet import LinkSpec, Network, NodeSpec, Topology
from .strategy import StrategyConfig
from .config import ScenarioConfig, load_scenario
from .harness import run_scenario, ScenarioResult

__all__ = [
    "Data",
    "Interest",
    "Nack",
    "NackReason",
    "Name",
    "name_from_uri",
    "LinkSpec",
    "Network",
    "NodeSpec",
    "Topology",
    "StrategyConfig",
    "ScenarioConfig",
    "load_scenario",
    "run_scenario",
    "ScenarioResult",
    "__version__",
]
