#!/usr/bin/env python3
"""
Primal-Dual Constrained DDPG Allocator

An actor maps the reduced state to a normalised allocation; a reward critic
and a cost critic score (state, action) pairs. The actor ascends the sampled
Lagrangian Q_R - λ·Q_C while the dual variable λ rises whenever the predicted
long-term DoS cost exceeds its budget. Two unconstrained baselines share the
same machinery: one pins λ to zero, the other learns on the negated cost.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import ConfigurationError, ContractViolationError, TrainingDivergedError
from .environment import EnvironmentParams, ReducedState, StepOutcome
from .networks import (DenseNet, GradientTape, Optimizer, load_checkpoint, make_optimizer,
                       save_checkpoint, soft_update)

logger = logging.getLogger(__name__)

MODES = ('constrained', 'min_latency', 'min_dos')
STATE_DIM = 2


@dataclass(frozen=True)
class AgentParams:
    """Learning parameters of the allocator and its training schedule."""

    gamma_r: float = 0.95
    gamma_c: float = 0.95
    eps_max: float = 0.02             # per-slot DoS probability threshold
    lr_reward_critic: float = 5e-4
    lr_cost_critic: float = 5e-4
    lr_actor: float = 2e-4
    lr_dual: float = 0.1
    initial_dual: float = 0.0
    batch_size: int = 512
    buffer_capacity: int = 100_000
    warmup_factor: int = 2            # learning starts after warmup_factor * batch_size transitions
    soft_update_rate: float = 0.005   # φ
    hidden_width: int = 64
    ou_theta: float = 0.15
    ou_sigma: float = 0.2
    ou_sigma_min: float = 0.01
    grad_clip: float = 1.0
    optimizer: str = 'adam'
    episodes: int = 60
    slots_per_episode: int = 1000

    @property
    def dos_budget(self) -> float:
        """E_max, the long-term discounted DoS budget."""
        return self.eps_max / (1.0 - self.gamma_c)

    @property
    def warmup(self) -> int:
        return self.warmup_factor * self.batch_size

    def validate(self) -> None:
        for name in ('gamma_r', 'gamma_c', 'eps_max'):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ConfigurationError(f'agent.{name}', f'must lie in (0, 1), got {value}')
        for name in ('lr_reward_critic', 'lr_cost_critic', 'lr_actor', 'lr_dual'):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ConfigurationError(f'agent.{name}', f'must be positive, got {value}')
        if self.initial_dual < 0:
            raise ConfigurationError('agent.initial_dual', 'must be non-negative')
        for name in ('batch_size', 'buffer_capacity', 'warmup_factor', 'hidden_width', 'slots_per_episode'):
            if getattr(self, name) < 1:
                raise ConfigurationError(f'agent.{name}', 'must be at least 1')
        if self.episodes < 0:
            raise ConfigurationError('agent.episodes', 'must be non-negative')
        if self.buffer_capacity < self.batch_size:
            raise ConfigurationError('agent.buffer_capacity', 'must hold at least one mini-batch')
        if not 0.0 <= self.soft_update_rate <= 1.0:
            raise ConfigurationError('agent.soft_update_rate', 'must lie in [0, 1]')
        if self.ou_theta < 0 or self.ou_sigma < 0 or self.ou_sigma_min < 0:
            raise ConfigurationError('agent.ou_sigma', 'noise parameters must be non-negative')
        if self.grad_clip <= 0:
            raise ConfigurationError('agent.grad_clip', 'must be positive')
        if self.optimizer not in ('adam', 'sgd'):
            raise ConfigurationError('agent.optimizer', f"expected 'adam' or 'sgd', got '{self.optimizer}'")


@dataclass(frozen=True)
class Transition:
    """One replay record: state, normalised action, reward, cost, next state."""

    state: ReducedState
    action: float
    reward: float
    cost: int
    next_state: ReducedState


@dataclass(frozen=True, eq=False)
class TransitionBatch:
    """Column view of sampled transitions."""

    states: np.ndarray       # (M, 2)
    actions: np.ndarray      # (M,)
    rewards: np.ndarray      # (M,)
    costs: np.ndarray        # (M,)
    next_states: np.ndarray  # (M, 2)

    def __len__(self) -> int:
        return int(self.actions.shape[0])

    @classmethod
    def from_transitions(cls, transitions: Sequence[Transition]) -> 'TransitionBatch':
        return cls(
            states=np.array([t.state.as_array() for t in transitions]),
            actions=np.array([t.action for t in transitions], dtype=np.float64),
            rewards=np.array([t.reward for t in transitions], dtype=np.float64),
            costs=np.array([t.cost for t in transitions], dtype=np.float64),
            next_states=np.array([t.next_state.as_array() for t in transitions]),
        )


class ReplayBuffer:
    """Fixed-capacity ring of transitions with uniform sampling."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError(f'replay capacity must be positive, got {capacity}')
        self.capacity = int(capacity)
        self.states = np.zeros((capacity, STATE_DIM))
        self.actions = np.zeros(capacity)
        self.rewards = np.zeros(capacity)
        self.costs = np.zeros(capacity)
        self.next_states = np.zeros((capacity, STATE_DIM))
        self.cursor = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def push(self, transition: Transition) -> None:
        i = self.cursor
        self.states[i] = transition.state.as_array()
        self.actions[i] = transition.action
        self.rewards[i] = transition.reward
        self.costs[i] = transition.cost
        self.next_states[i] = transition.next_state.as_array()
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        if self.size < batch_size:
            raise ContractViolationError(f'cannot sample {batch_size} from {self.size} transitions')
        return rng.integers(0, self.size, size=batch_size)

    def sample(self, batch_size: int, rng: np.random.Generator) -> TransitionBatch:
        """Uniform draw with replacement."""
        idx = self.sample_indices(batch_size, rng)
        return TransitionBatch(self.states[idx], self.actions[idx], self.rewards[idx],
                               self.costs[idx], self.next_states[idx])


@dataclass(frozen=True)
class DualState:
    """Lagrange multiplier of the DoS constraint."""

    value: float
    lr: float
    budget: float

    def __post_init__(self) -> None:
        if self.value < 0:
            raise ContractViolationError(f'dual variable must be non-negative, got {self.value}')

    def ascend(self, mean_cost_value: float) -> 'DualState':
        """Projected ascent on the residual (mean Q_C - E_max)."""
        return DualState(max(0.0, self.value + self.lr * (mean_cost_value - self.budget)),
                         self.lr, self.budget)


class OUNoise:
    """Ornstein-Uhlenbeck exploration noise with a linearly annealed volatility."""

    def __init__(self, theta: float, sigma: float, rng: np.random.Generator,
                 sigma_min: Optional[float] = None, value: float = 0.0):
        self.theta = theta
        self.sigma_start = sigma
        self.sigma_min = sigma if sigma_min is None else sigma_min
        self.sigma = sigma
        self.rng = rng
        self.value = value

    def reset(self) -> None:
        self.value = 0.0

    def anneal(self, progress: float) -> float:
        """Set σ for a training progress fraction in [0, 1]."""
        progress = min(max(progress, 0.0), 1.0)
        self.sigma = self.sigma_start + (self.sigma_min - self.sigma_start) * progress
        return self.sigma

    def sample(self) -> float:
        self.value += -self.theta * self.value + self.sigma * float(self.rng.standard_normal())
        return self.value


def map_action(u: float, avail: float, min_alloc: float, capacity: float) -> float:
    """Normalised action to an admissible rate in {0} ∪ [Δf, min(F, avail)].

    Candidates below Δf, and any slot with less than Δf free, snap to denial.
    """
    u = min(max(float(u), 0.0), 1.0)
    candidate = u * capacity
    if candidate < min_alloc or avail < min_alloc:
        return 0.0
    return min(candidate, avail, capacity)


def _with_action(states: np.ndarray, actions: np.ndarray) -> np.ndarray:
    return np.column_stack((states, np.reshape(actions, (-1,))))


def td_targets(batch: TransitionBatch, target_reward_critic: DenseNet, target_cost_critic: DenseNet,
               target_actor: DenseNet, gamma_r: float, gamma_c: float) -> Tuple[np.ndarray, np.ndarray]:
    """Bootstrapped targets y^R = r + γ_r Q'_R(s', μ'(s')) and y^C likewise."""
    if len(batch) < 1:
        raise ContractViolationError('TD targets need at least one transition')
    next_inputs = _with_action(batch.next_states, target_actor.predict(batch.next_states))
    y_r = batch.rewards + gamma_r * target_reward_critic.predict(next_inputs)[:, 0]
    y_c = batch.costs + gamma_c * target_cost_critic.predict(next_inputs)[:, 0]
    return y_r, y_c


def regress_critic(critic: DenseNet, optimizer: Optimizer, inputs: np.ndarray,
                   targets: np.ndarray) -> float:
    """One optimizer step on the mean squared residual; returns the pre-step loss."""
    q = critic.forward(inputs)[:, 0]
    residual = targets - q
    loss = float(np.mean(residual ** 2))
    tape, _ = critic.backward(inputs, (-2.0 * residual / residual.size).reshape(-1, 1))
    optimizer.step(critic, tape)
    return loss


def critic_update(batch: TransitionBatch, y_r: np.ndarray, y_c: np.ndarray,
                  reward_critic: DenseNet, cost_critic: DenseNet,
                  reward_optimizer: Optimizer, cost_optimizer: Optimizer) -> Tuple[float, float]:
    inputs = _with_action(batch.states, batch.actions)
    loss_r = regress_critic(reward_critic, reward_optimizer, inputs, y_r)
    loss_c = regress_critic(cost_critic, cost_optimizer, inputs, y_c)
    return loss_r, loss_c


def actor_objective(states: np.ndarray, actor: DenseNet, reward_critic: DenseNet,
                    cost_critic: DenseNet, dual: float) -> float:
    """Sampled Lagrangian (1/M) Σ [Q_R(s, μ(s)) - λ Q_C(s, μ(s))]."""
    inputs = _with_action(states, actor.predict(states))
    return float(np.mean(reward_critic.predict(inputs)[:, 0] - dual * cost_critic.predict(inputs)[:, 0]))


def actor_objective_gradient(states: np.ndarray, actor: DenseNet, reward_critic: DenseNet,
                             cost_critic: DenseNet, dual: float) -> GradientTape:
    """Gradient of actor_objective w.r.t. the actor parameters.

    Chains the critics' action-input gradient (last input column) into the actor.
    """
    states = np.asarray(states, dtype=np.float64)
    m = states.shape[0]
    u = actor.forward(states)
    inputs = _with_action(states, u)
    seed = np.full((m, 1), 1.0 / m)
    reward_critic.forward(inputs)
    _, grad_r = reward_critic.backward(inputs, seed)
    cost_critic.forward(inputs)
    _, grad_c = cost_critic.backward(inputs, seed)
    d_action = grad_r[:, -1] - dual * grad_c[:, -1]
    tape, _ = actor.backward(states, d_action.reshape(-1, 1))
    return tape


def actor_update(batch: TransitionBatch, reward_critic: DenseNet, cost_critic: DenseNet,
                 actor: DenseNet, optimizer: Optimizer, dual: float) -> float:
    """Ascent step on the sampled Lagrangian; returns the pre-step objective."""
    objective = actor_objective(batch.states, actor, reward_critic, cost_critic, dual)
    tape = actor_objective_gradient(batch.states, actor, reward_critic, cost_critic, dual)
    optimizer.step(actor, tape.scaled(-1.0))
    return objective


def dual_update(batch: TransitionBatch, cost_critic: DenseNet, actor: DenseNet,
                dual: DualState) -> DualState:
    inputs = _with_action(batch.states, actor.predict(batch.states))
    return dual.ascend(float(np.mean(cost_critic.predict(inputs)[:, 0])))


@dataclass(frozen=True)
class LearnStats:
    critic_loss_r: float
    critic_loss_c: float
    actor_obj: float
    dual: float

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in (self.critic_loss_r, self.critic_loss_c, self.actor_obj, self.dual))


class PrimalDualAgent:
    """Actor, reward and cost critics, their targets, optimizers and the dual.

    Modes:
        constrained: Lagrangian actor with projected dual ascent
        min_latency: λ pinned to 0, pure reward
        min_dos: λ pinned to 0, learns on reward -c
    """

    def __init__(self, params: AgentParams, env_params: EnvironmentParams,
                 rng: np.random.Generator, mode: str = 'constrained'):
        if mode not in MODES:
            raise ConfigurationError('mode', f"expected one of {MODES}, got '{mode}'")
        params.validate()
        self.params = params
        self.env_params = env_params
        self.mode = mode

        width = params.hidden_width
        self.actor = DenseNet.build((STATE_DIM, width, width, 1), rng,
                                    output_activation='sigmoid', final_scale=3e-3)
        self.reward_critic = DenseNet.build((STATE_DIM + 1, width, width, 1), rng)
        self.cost_critic = DenseNet.build((STATE_DIM + 1, width, width, 1), rng)
        self.target_actor = self.actor.copy()
        self.target_reward_critic = self.reward_critic.copy()
        self.target_cost_critic = self.cost_critic.copy()

        clip = params.grad_clip
        self.actor_optimizer = make_optimizer(params.optimizer, self.actor, params.lr_actor, clip)
        self.reward_optimizer = make_optimizer(params.optimizer, self.reward_critic, params.lr_reward_critic, clip)
        self.cost_optimizer = make_optimizer(params.optimizer, self.cost_critic, params.lr_cost_critic, clip)

        initial = params.initial_dual if mode == 'constrained' else 0.0
        self.dual = DualState(initial, params.lr_dual, params.dos_budget)
        self.learn_steps = 0

    def act(self, state: ReducedState, avail: float,
            noise: Optional[OUNoise] = None) -> Tuple[float, float]:
        """Normalised action (clamped to [0, 1]) and the admissible rate it maps to."""
        u = float(self.actor.predict(state.as_array())[0])
        if noise is not None:
            u += noise.sample()
        if not math.isfinite(u):
            raise TrainingDivergedError(f"non-finite actor output for state {state}")
        u = min(max(u, 0.0), 1.0)
        return u, map_action(u, avail, self.env_params.min_alloc, self.env_params.capacity)

    def training_reward(self, outcome: StepOutcome) -> float:
        if self.mode == 'min_dos':
            return -float(outcome.cost)
        return outcome.reward

    def learn(self, batch: TransitionBatch) -> LearnStats:
        p = self.params
        y_r, y_c = td_targets(batch, self.target_reward_critic, self.target_cost_critic,
                              self.target_actor, p.gamma_r, p.gamma_c)
        loss_r, loss_c = critic_update(batch, y_r, y_c, self.reward_critic, self.cost_critic,
                                       self.reward_optimizer, self.cost_optimizer)
        objective = actor_update(batch, self.reward_critic, self.cost_critic, self.actor,
                                 self.actor_optimizer, self.dual.value)
        if self.mode == 'constrained':
            self.dual = dual_update(batch, self.cost_critic, self.actor, self.dual)

        soft_update(self.target_actor, self.actor, p.soft_update_rate)
        soft_update(self.target_reward_critic, self.reward_critic, p.soft_update_rate)
        soft_update(self.target_cost_critic, self.cost_critic, p.soft_update_rate)
        self.learn_steps += 1
        return LearnStats(loss_r, loss_c, objective, self.dual.value)

    def networks(self) -> Dict[str, DenseNet]:
        return {
            'actor': self.actor,
            'reward_critic': self.reward_critic,
            'cost_critic': self.cost_critic,
            'target_actor': self.target_actor,
            'target_reward_critic': self.target_reward_critic,
            'target_cost_critic': self.target_cost_critic,
        }

    def optimizers(self) -> Dict[str, Optimizer]:
        return {
            'actor': self.actor_optimizer,
            'reward_critic': self.reward_optimizer,
            'cost_critic': self.cost_optimizer,
        }

    def check_finite(self, where: str = '') -> None:
        for name, net in self.networks().items():
            if not net.is_finite():
                raise TrainingDivergedError(f'non-finite parameters in {name}{where}')
        if not math.isfinite(self.dual.value):
            raise TrainingDivergedError(f'non-finite dual variable{where}')

    def save(self, path: Union[str, Path], extra: Optional[Dict[str, object]] = None) -> Path:
        payload = {'mode': self.mode, 'dual': self.dual.value, 'learn_steps': self.learn_steps}
        payload.update(extra or {})
        return save_checkpoint(path, self.networks(), self.optimizers(), payload)

    def restore(self, path: Union[str, Path]) -> None:
        """Load networks, optimizer moments and the dual written by save()."""
        container = load_checkpoint(path)
        networks = container['networks']
        for name in self.networks():
            if name in networks:
                setattr(self, name, networks[name])
        for name, optimizer in self.optimizers().items():
            if name in container['optimizers']:
                optimizer.load_state_dict(container['optimizers'][name])
        extra = container['extra']
        self.dual = DualState(float(extra.get('dual', self.dual.value)), self.dual.lr, self.dual.budget)
        self.learn_steps = int(extra.get('learn_steps', 0))
        logger.info("Restored %s agent from %s", extra.get('mode', self.mode), path)


def baseline_policy(kind: str, params: AgentParams, env_params: EnvironmentParams,
                    rng: np.random.Generator) -> PrimalDualAgent:
    """Unconstrained benchmark: 'min_latency' or 'min_dos'."""
    if kind not in ('min_latency', 'min_dos'):
        raise ConfigurationError('mode', f"unknown baseline '{kind}'")
    return PrimalDualAgent(params, env_params, rng, mode=kind)


def discounted_returns(values: Sequence[float], gamma: float) -> np.ndarray:
    """G_t = v_t + γ G_{t+1} for every start slot of a finite stream."""
    values = np.asarray(values, dtype=np.float64)
    returns = np.empty_like(values)
    running = 0.0
    for t in range(values.size - 1, -1, -1):
        running = values[t] + gamma * running
        returns[t] = running
    return returns


def monte_carlo_discounted_cost(costs: Sequence[float], gamma: float) -> float:
    """Discounted cost-to-go averaged over every start slot of a stream.

    For a stationary stream this estimates E[c] / (1 - γ).
    """
    return float(np.mean(discounted_returns(costs, gamma)))
