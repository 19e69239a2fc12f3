"""Energy-density cluster-head election and on-demand depth routing for WSNs."""

__version__ = "0.1.0"

from .clustering import Cluster, HeadStrategy
from .net_model import ConfigError, EnergyModel, Network, NetworkConfig, Node
from .sim_engine import MetricsFrame, RunResult, TrafficProfile, run

__all__ = [
    "Cluster", "ConfigError", "EnergyModel", "HeadStrategy", "MetricsFrame",
    "Network", "NetworkConfig", "Node", "RunResult", "TrafficProfile", "run",
]
