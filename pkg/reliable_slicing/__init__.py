"""Reliable Slicing: constrained resource allocation for a blockchain-secured cell

A slot-based simulator of a serving base station, a reputation-based
committee protocol for selecting it, and a primal-dual actor-critic allocator
that keeps the long-term denial-of-service probability under a threshold
while minimising processing latency.
"""

__version__ = "0.1.0"
__description__ = "Reputation-aware, DoS-constrained network-slicing resource allocation"

from .core.agent import AgentParams, PrimalDualAgent
from .core.environment import EnvironmentParams, SlicingEnvironment
from .core.experiments import ExperimentRunner
from .core.figures import FigureDataExporter
from .core.reputation import AttackProfile, ReputationParams, ReputationTable
from .utils.config import ExperimentConfig, load_config

__all__ = [
    "AgentParams",
    "AttackProfile",
    "EnvironmentParams",
    "ExperimentConfig",
    "ExperimentRunner",
    "FigureDataExporter",
    "PrimalDualAgent",
    "ReputationParams",
    "ReputationTable",
    "SlicingEnvironment",
    "load_config",
]
