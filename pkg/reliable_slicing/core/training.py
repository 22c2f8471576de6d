#!/usr/bin/env python3
"""
Training and Evaluation Loops

Runs the allocator slot by slot against the serving-BS environment, with an
optional reputation-driven attack scenario in which the serving miner is
drawn from the committee each slot and malicious miners deny service at
random.
"""

import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..data.figure_schemas import LOG_SCHEMAS
from ..errors import ConfigurationError, TrainingDivergedError
from ..utils.seeding import spawn_streams
from .agent import AgentParams, OUNoise, PrimalDualAgent, ReplayBuffer, Transition
from .environment import ArrivalSampler, EnvironmentParams, SlicingEnvironment
from .reputation import (AttackProfile, ReputationParams, ReputationTable, aggregate_feedback,
                         assign_miner, malicious_feedback)

logger = logging.getLogger(__name__)

TRAINING_LOG_COLUMNS: List[str] = LOG_SCHEMAS['training_log']['columns']


@dataclass(frozen=True)
class EpisodeRecord:
    """Per-episode training or evaluation metrics.

    Latency is averaged over slots with an allocation; losses over learn
    steps (NaN when none happened, e.g. during warm-up).
    """

    episode: int
    mean_latency_norm: float
    dos_rate: float
    dual: float
    critic_loss_r: float
    critic_loss_c: float
    actor_obj: float
    mean_reward: float = 0.0
    attack_denials: int = 0


class AttackScenario:
    """Committee-based miner selection with Bernoulli denials by malicious BSs.

    Only denials caused by a malicious miner are reported as negative
    feedback; the policy's own admission-control denials are not misbehavior.
    """

    def __init__(self, params: ReputationParams, profiles: Sequence[AttackProfile],
                 miner_rng: np.random.Generator, attack_rng: np.random.Generator):
        for index, profile in enumerate(profiles):
            if not 0 <= profile.bs_id < params.num_bs:
                raise ConfigurationError(f'attacks[{index}].bs_id',
                                         f'{profile.bs_id} outside [0, {params.num_bs})')
            profile.validate(f'attacks[{index}]')
        self.params = params
        self.table = ReputationTable(params)
        self.malicious: Dict[int, AttackProfile] = {p.bs_id: p for p in profiles}
        self.miner_rng = miner_rng
        self.attack_rng = attack_rng

    def reset(self) -> None:
        """Every BS starts the episode honest, at full reputation."""
        self.table = ReputationTable(self.params)

    def draw(self, slot: int) -> Tuple[int, bool]:
        """Serving miner for `slot` and whether it denies the slot's requests."""
        miner = assign_miner(self.table.committee(), self.miner_rng)
        profile = self.malicious.get(miner)
        denied = profile is not None and malicious_feedback(profile, slot, self.attack_rng) == 1
        return miner, denied

    def report(self, miner: int, denied: bool) -> None:
        self.table.apply_feedback({miner: aggregate_feedback([0 if denied else 1], miner)})


@dataclass
class TrainingSession:
    """Everything one (mode, seed) run owns."""

    env: SlicingEnvironment
    agent: PrimalDualAgent
    noise: OUNoise
    buffer: ReplayBuffer
    replay_rng: np.random.Generator
    attack: Optional[AttackScenario] = None
    global_step: int = field(default=0)

    @classmethod
    def create(cls, env_params: EnvironmentParams, agent_params: AgentParams, seed: int,
               mode: str = 'constrained', attacks: bool = False,
               reputation_params: Optional[ReputationParams] = None,
               attack_profiles: Sequence[AttackProfile] = (),
               arrival_sampler: Optional[ArrivalSampler] = None,
               record_trajectory: bool = False) -> 'TrainingSession':
        """Build a session whose random streams all derive from `seed`.

        Runs with the same seed see the same arrivals whatever the mode.
        """
        streams = spawn_streams(seed)
        env = SlicingEnvironment(env_params, streams['arrivals'], arrival_sampler, record_trajectory)
        agent = PrimalDualAgent(agent_params, env_params, streams['init'], mode)
        noise = OUNoise(agent_params.ou_theta, agent_params.ou_sigma, streams['noise'],
                        sigma_min=agent_params.ou_sigma_min)
        attack = None
        if attacks:
            attack = AttackScenario(reputation_params or ReputationParams(), attack_profiles,
                                    streams['miner'], streams['attacks'])
        return cls(env, agent, noise, ReplayBuffer(agent_params.buffer_capacity),
                   streams['replay'], attack)


def _mean_or_nan(values: List[float]) -> float:
    return float(np.mean(values)) if values else math.nan


def run_episode(session: TrainingSession, episode: int, learn: bool = True,
                explore: bool = True) -> EpisodeRecord:
    """One episode from an empty lease queue and, under attack, fresh reputations."""
    env, agent, params = session.env, session.agent, session.agent.params
    total_slots = max(params.episodes * params.slots_per_episode - 1, 1)
    state = env.reset()
    session.noise.reset()
    if session.attack:
        session.attack.reset()

    latencies: List[float] = []
    costs = 0
    reward_sum = 0.0
    denials = 0
    losses_r: List[float] = []
    losses_c: List[float] = []
    objectives: List[float] = []

    for _ in range(params.slots_per_episode):
        noise = None
        if explore:
            session.noise.anneal(session.global_step / total_slots)
            noise = session.noise
        batch = env.next_arrivals()
        u, rate = agent.act(state, env.available(), noise)

        miner, denied = (session.attack.draw(env.slot) if session.attack else (-1, False))
        if denied:
            rate = 0.0
            denials += 1
        outcome = env.step(batch, rate)
        if session.attack:
            session.attack.report(miner, denied)

        costs += outcome.cost
        reward_sum += outcome.reward
        if outcome.cost == 0:
            latencies.append(outcome.latency_slots / env.tau_max)

        if learn:
            session.buffer.push(Transition(state, u, agent.training_reward(outcome),
                                           outcome.cost, outcome.next_state))
            if len(session.buffer) >= max(params.warmup, params.batch_size):
                stats = agent.learn(session.buffer.sample(params.batch_size, session.replay_rng))
                if not stats.is_finite():
                    raise TrainingDivergedError(
                        f'non-finite learning statistics at episode {episode}, '
                        f'learn step {agent.learn_steps}: {stats}')
                agent.check_finite(f' at episode {episode}, learn step {agent.learn_steps}')
                losses_r.append(stats.critic_loss_r)
                losses_c.append(stats.critic_loss_c)
                objectives.append(stats.actor_obj)
        state = outcome.next_state
        session.global_step += 1

    slots = params.slots_per_episode
    return EpisodeRecord(
        episode=episode,
        mean_latency_norm=_mean_or_nan(latencies),
        dos_rate=costs / slots,
        dual=agent.dual.value,
        critic_loss_r=_mean_or_nan(losses_r),
        critic_loss_c=_mean_or_nan(losses_c),
        actor_obj=_mean_or_nan(objectives),
        mean_reward=reward_sum / slots,
        attack_denials=denials,
    )


def train(session: TrainingSession, checkpoint_path: Optional[Union[str, Path]] = None) -> List[EpisodeRecord]:
    """Train for `agent.params.episodes` episodes and optionally checkpoint.

    Raises:
        TrainingDivergedError: a loss, the dual or a parameter became NaN/Inf
    """
    params = session.agent.params
    records: List[EpisodeRecord] = []
    for episode in range(params.episodes):
        record = run_episode(session, episode, learn=True, explore=True)
        records.append(record)
        logger.info("[%s] episode %d: latency %.4f, DoS %.4f, dual %.4f",
                    session.agent.mode, episode, record.mean_latency_norm,
                    record.dos_rate, record.dual)

    if checkpoint_path is not None:
        session.agent.save(checkpoint_path, {'episodes': len(records)})
    return records


def evaluate_policy(session: TrainingSession, episodes: int) -> List[EpisodeRecord]:
    """Greedy rollouts without exploration or learning."""
    return [run_episode(session, episode, learn=False, explore=False) for episode in range(episodes)]


def records_to_frame(records: Sequence[EpisodeRecord],
                     columns: Sequence[str] = TRAINING_LOG_COLUMNS) -> pd.DataFrame:
    frame = pd.DataFrame([asdict(r) for r in records], columns=[f.name for f in fields(EpisodeRecord)])
    return frame[list(columns)]


def write_training_log(records: Sequence[EpisodeRecord], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    records_to_frame(records).to_csv(path, index=False)
    logger.info("Saved training log to %s", path)
    return path


def read_training_log(path: Union[str, Path]) -> pd.DataFrame:
    return pd.read_csv(path)
