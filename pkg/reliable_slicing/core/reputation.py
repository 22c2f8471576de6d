#!/usr/bin/env python3
"""
Base Station Reputation and Committee Selection

Reputations blend aggregated user feedback with a decay-weighted history of
past values. High-reputation BSs form the committee; the serving miner is
drawn uniformly from it. Malicious BSs deny service following a Bernoulli
process whose probability may follow a piecewise-constant schedule.
"""

import logging
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Deque, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..errors import ConfigurationError, EmptyCommitteeError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReputationParams:
    """Reputation, committee and tracking-experiment parameters."""

    num_bs: int = 10                  # N_B
    feedback_weight: float = 0.2      # ϑ_I
    history_window: int = 10          # τ_ξ, slots
    history_decay: float = 0.1        # δ in β(k) = (1 - δ)^(k - 1)
    committee_threshold: float = 0.8
    committee_size: int = 4
    initial_reputation: float = 1.0
    feedback_users: int = 1           # feedback indicators collected per slot
    trace_slots: int = 1000

    def validate(self) -> None:
        if self.num_bs < 1:
            raise ConfigurationError('reputation.num_bs', 'must be at least 1')
        if not 0.0 <= self.feedback_weight <= 1.0:
            raise ConfigurationError('reputation.feedback_weight', 'must lie in [0, 1]')
        if self.history_window < 1:
            raise ConfigurationError('reputation.history_window', 'must be at least 1')
        if not 0.0 <= self.history_decay < 1.0:
            raise ConfigurationError('reputation.history_decay', 'must lie in [0, 1)')
        if not 0.0 <= self.committee_threshold <= 1.0:
            raise ConfigurationError('reputation.committee_threshold', 'must lie in [0, 1]')
        if not 0 < self.committee_size <= self.num_bs:
            raise ConfigurationError('reputation.committee_size', 'must lie in [1, num_bs]')
        if not 0.0 <= self.initial_reputation <= 1.0:
            raise ConfigurationError('reputation.initial_reputation', 'must lie in [0, 1]')
        if self.feedback_users < 1:
            raise ConfigurationError('reputation.feedback_users', 'must be at least 1')
        if self.trace_slots < 1:
            raise ConfigurationError('reputation.trace_slots', 'must be at least 1')


def decay_weights(window: int, decay: float) -> np.ndarray:
    """Lag weights β(k) = (1 - δ)^(k - 1), k = 1..τ, scaled to sum to τ.

    With this scaling (1/τ) Σ β(k) ξ(t - k) leaves a constant history unchanged.
    """
    raw = (1.0 - decay) ** np.arange(window, dtype=np.float64)
    return raw * (window / raw.sum())


@dataclass(frozen=True)
class ReputationRecord:
    """Current reputation of one BS and its recent history (most recent last)."""

    bs_id: int
    current: float
    history: Tuple[float, ...]
    feedback_weight: float
    decay: np.ndarray = field(repr=False, compare=False)

    @classmethod
    def initial(cls, bs_id: int, params: ReputationParams) -> 'ReputationRecord':
        return cls(bs_id=bs_id, current=params.initial_reputation, history=(),
                   feedback_weight=params.feedback_weight,
                   decay=decay_weights(params.history_window, params.history_decay))

    @property
    def window(self) -> int:
        return int(self.decay.size)


@dataclass(frozen=True)
class FeedbackBatch:
    """Aggregated user feedback for one BS in one slot."""

    bs_id: int
    served_fraction: float = 0.0
    empty: bool = True


@dataclass(frozen=True)
class AttackProfile:
    """DoS-feedback probability of one BS as a piecewise-constant schedule.

    The schedule holds (from_slot, prob) breakpoints; the probability is 0
    before the first breakpoint.
    """

    bs_id: int
    schedule: Tuple[Tuple[int, float], ...]
    name: str = ''

    @classmethod
    def constant(cls, bs_id: int, prob: float, name: str = '') -> 'AttackProfile':
        return cls(bs_id=bs_id, schedule=((0, prob),), name=name)

    def validate(self, key: str = 'attacks') -> None:
        if not self.schedule:
            raise ConfigurationError(f'{key}.schedule', 'needs at least one breakpoint')
        previous = -1
        for from_slot, prob in self.schedule:
            if from_slot < 0 or from_slot <= previous:
                raise ConfigurationError(f'{key}.schedule', 'from_slot values must be non-negative and increasing')
            if not 0.0 <= prob <= 1.0:
                raise ConfigurationError(f'{key}.schedule', f'prob {prob} outside [0, 1]')
            previous = from_slot

    def prob_at(self, slot: int) -> float:
        prob = 0.0
        for from_slot, value in self.schedule:
            if from_slot > slot:
                break
            prob = value
        return prob

    def to_dict(self) -> Dict[str, object]:
        data: Dict[str, object] = {
            'bs_id': self.bs_id,
            'schedule': [{'from_slot': s, 'prob': p} for s, p in self.schedule],
        }
        if self.name:
            data['name'] = self.name
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, object]) -> 'AttackProfile':
        schedule = tuple((int(entry['from_slot']), float(entry['prob'])) for entry in data['schedule'])
        return cls(bs_id=int(data['bs_id']), schedule=schedule, name=str(data.get('name', '')))


def historical_component(record: ReputationRecord, now: Optional[int] = None) -> float:
    """Decay-weighted mean of the stored past reputations.

    With fewer than τ_ξ entries the weights of the available lags are
    renormalised; with none the current value is returned. The history
    length already reflects `now`, which is accepted for slot-aligned callers.
    """
    if not record.history:
        return record.current
    lags = np.array(record.history[::-1], dtype=np.float64)
    weights = record.decay[:lags.size]
    return float(np.dot(weights, lags) / weights.sum())


def update_reputation(record: ReputationRecord, fb: FeedbackBatch) -> ReputationRecord:
    """One slot of the reputation update.

    The previous value enters the history ring in both branches; empty
    feedback keeps the current value.
    """
    history: Deque[float] = deque(record.history, maxlen=record.window)
    history.append(record.current)
    advanced = replace(record, history=tuple(history))
    if fb.empty:
        return advanced
    blended = (record.feedback_weight * fb.served_fraction
               + (1.0 - record.feedback_weight) * historical_component(advanced))
    return replace(advanced, current=min(max(blended, 0.0), 1.0))


def aggregate_feedback(served_indicators: Sequence[int], bs_id: int = 0) -> FeedbackBatch:
    """Fraction of users reporting their request as served."""
    if len(served_indicators) == 0:
        return FeedbackBatch(bs_id=bs_id)
    return FeedbackBatch(bs_id=bs_id, served_fraction=float(np.mean(served_indicators)), empty=False)


def select_committee(records: Iterable[ReputationRecord], threshold: float, size: int) -> Tuple[int, ...]:
    """Top-`size` BSs by reputation among those at or above `threshold`.

    Ties are broken by the lower id. The result is sorted by id.

    Raises:
        EmptyCommitteeError: no BS meets the threshold
    """
    if size < 1:
        raise ValueError(f'committee size must be positive, got {size}')
    eligible = [r for r in records if r.current >= threshold]
    if not eligible:
        raise EmptyCommitteeError(f'no base station has reputation >= {threshold}')
    ranked = sorted(eligible, key=lambda r: (-r.current, r.bs_id))[:size]
    return tuple(sorted(r.bs_id for r in ranked))


def assign_miner(committee: Sequence[int], rng: np.random.Generator) -> int:
    """Uniform draw of the serving BS from the committee."""
    if len(committee) == 0:
        raise EmptyCommitteeError('cannot assign a miner from an empty committee')
    return int(committee[int(rng.integers(len(committee)))])


def malicious_feedback(profile: AttackProfile, now: int, rng: np.random.Generator) -> int:
    """Bernoulli DoS indicator: 1 means a user reported a denial."""
    return int(rng.random() < profile.prob_at(now))


class ReputationTable:
    """Reputation records of every BS, owned by one coordinator."""

    def __init__(self, params: ReputationParams):
        params.validate()
        self.params = params
        self.records: List[ReputationRecord] = [
            ReputationRecord.initial(bs_id, params) for bs_id in range(params.num_bs)
        ]

    def apply_feedback(self, feedback: Dict[int, FeedbackBatch]) -> None:
        """Advance every record by one slot; BSs absent from `feedback` get none."""
        self.records = [
            update_reputation(record, feedback.get(record.bs_id, FeedbackBatch(bs_id=record.bs_id)))
            for record in self.records
        ]

    def committee(self) -> Tuple[int, ...]:
        return select_committee(self.records, self.params.committee_threshold,
                                self.params.committee_size)

    def snapshot(self) -> Dict[int, float]:
        return {record.bs_id: record.current for record in self.records}


def track_reputation(profile: AttackProfile, params: ReputationParams,
                     rng: np.random.Generator) -> pd.DataFrame:
    """Reputation trace of one BS receiving DoS feedback per `profile`.

    Each slot collects `feedback_users` indicators; a DoS report counts as
    not served.

    Returns:
        DataFrame with columns slot, bs_id, reputation
    """
    params.validate()
    record = ReputationRecord.initial(profile.bs_id, params)
    values = np.empty(params.trace_slots, dtype=np.float64)
    for slot in range(params.trace_slots):
        served = [1 - malicious_feedback(profile, slot, rng) for _ in range(params.feedback_users)]
        record = update_reputation(record, aggregate_feedback(served, profile.bs_id))
        values[slot] = record.current

    logger.debug("Tracked %s: final reputation %.3f", profile.name or profile.bs_id, values[-1])
    return pd.DataFrame({
        'slot': np.arange(params.trace_slots),
        'bs_id': profile.bs_id,
        'reputation': values,
    })


def tail_mean(trace: pd.DataFrame, slots: int = 200) -> float:
    """Mean reputation over the last `slots` entries of a trace."""
    return float(trace['reputation'].iloc[-slots:].mean())

