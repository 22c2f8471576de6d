"""Core modules: environment, reputation, networks, agent, training and experiments."""

from .environment import EnvironmentParams, SlicingEnvironment
from .reputation import AttackProfile, ReputationParams, ReputationTable
from .networks import DenseNet
from .agent import AgentParams, PrimalDualAgent
from .training import TrainingSession, evaluate_policy, train

__all__ = [
    "AgentParams",
    "AttackProfile",
    "DenseNet",
    "EnvironmentParams",
    "PrimalDualAgent",
    "ReputationParams",
    "ReputationTable",
    "SlicingEnvironment",
    "TrainingSession",
    "evaluate_policy",
    "train",
]
