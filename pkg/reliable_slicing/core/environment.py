#!/usr/bin/env python3
"""
Slot-based Simulation of a Serving (Miner) Base Station

Request arrivals, CPU-cycle demand for service provisioning and block
processing, resource leases held over several slots, processing latency,
denial-of-service cost and the full and reduced MDP states.
"""

import json
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Union

import numpy as np

from ..errors import ConfigurationError, ContractViolationError, UndefinedLatencyError

logger = logging.getLogger(__name__)

# Full-state arrays longer than this are refused (verbatim demand mode only).
MAX_FULL_STATE_LENGTH = 1_000_000


@dataclass(frozen=True)
class EnvironmentParams:
    """Parameters of the serving BS and its request process."""

    capacity: float = 1.6e9               # F, CPU cycles/slot
    min_alloc: float = 0.01e9             # Δf, CPU cycles/slot
    arrival_rate: float = 1000.0          # mean requests per slot
    arrival_cap_factor: float = 2.0       # Poisson draws truncated at factor * mean
    size_min: float = 1000.0              # bytes (1 KB)
    size_max: float = 10000.0             # bytes (10 KB)
    kappa_sp: float = 330.0               # cycles/byte, service provisioning
    kappa_bc: float = 330.0               # cycles/byte, block processing
    header_bytes: float = 500.0           # block header size
    per_request_block_bytes: float = 50.0  # block bytes added per request
    inter_bs_rate: float = 10e9           # W, bit/s; recorded, not simulated
    verbatim_service_demand: bool = False  # extra λ(t) factor in the service demand
    verbatim_backlog: bool = False         # unweighted remaining-latency sum in the backlog

    def validate(self) -> None:
        """Raise ConfigurationError on the first invalid field."""
        positive = ('capacity', 'min_alloc', 'arrival_rate', 'size_min', 'size_max',
                    'kappa_sp', 'inter_bs_rate')
        for name in positive:
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ConfigurationError(f'environment.{name}', f'must be positive, got {value}')
        for name in ('kappa_bc', 'header_bytes', 'per_request_block_bytes'):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ConfigurationError(f'environment.{name}', f'must be non-negative, got {value}')
        if self.kappa_bc * self.header_bytes <= 0:
            # empty batches still carry block demand
            raise ConfigurationError('environment.kappa_bc', 'kappa_bc and header_bytes must both be positive')
        if self.size_min > self.size_max:
            raise ConfigurationError('environment.size_min', 'must not exceed environment.size_max')
        if self.min_alloc > self.capacity:
            raise ConfigurationError('environment.min_alloc', 'must not exceed environment.capacity')
        if self.arrival_cap_factor < 1.0:
            raise ConfigurationError('environment.arrival_cap_factor', 'must be at least 1')

    @property
    def arrival_cap(self) -> int:
        """Largest request count a slot can carry."""
        return int(math.ceil(self.arrival_cap_factor * self.arrival_rate))

    @property
    def max_demand(self) -> float:
        """Upper bound on per-slot CPU demand f_r,max (cycles)."""
        cap = self.arrival_cap
        service = self.kappa_sp * cap * self.size_max
        if self.verbatim_service_demand:
            service *= cap
        block = self.kappa_bc * (self.header_bytes + self.per_request_block_bytes * cap)
        return service + block

    @property
    def tau_max(self) -> float:
        """Largest processing latency in slots, reached at the minimum allocation."""
        return self.max_demand / self.min_alloc

    @property
    def horizon(self) -> int:
        """Number of past slots T_max a lease can stay active."""
        return int(math.ceil(self.tau_max))


@dataclass(frozen=True, eq=False)
class RequestBatch:
    """User requests that arrived in one slot."""

    slot_index: int
    count: int
    sizes: np.ndarray
    cpu_demand_sp: float = 0.0
    cpu_demand_bc: float = 0.0

    @property
    def total_demand(self) -> float:
        return self.cpu_demand_sp + self.cpu_demand_bc


@dataclass(frozen=True)
class ResourceLease:
    """A past allocation and what it still holds at the current slot."""

    alloc_slot: int
    rate: float
    total_latency_slots: int
    remaining_slots: int
    held_rate: float

    @classmethod
    def open(cls, slot: int, rate: float, latency: float) -> 'ResourceLease':
        """Lease created at allocation time; the hold time is the latency rounded up."""
        if rate == 0:
            return cls(slot, 0.0, 0, 0, 0.0)
        total = int(math.ceil(latency))
        return cls(slot, float(rate), total, total, float(rate) if total > 0 else 0.0)

    def at(self, now: int) -> 'ResourceLease':
        """Remaining hold time and held rate as seen from slot `now`."""
        remaining = max(self.total_latency_slots - (now - self.alloc_slot), 0)
        return replace(self, remaining_slots=remaining,
                       held_rate=self.rate if remaining > 0 else 0.0)

    @property
    def active(self) -> bool:
        return self.remaining_slots > 0


class LeaseQueue:
    """Leases allocated within the last T_max slots that still hold capacity.

    Expired leases contribute (0, 0) to the full state exactly as slots without
    an allocation do, so they are pruned at tick time.
    """

    def __init__(self, capacity: float, min_alloc: float, horizon: int, now: int = 0):
        self.capacity = float(capacity)
        self.min_alloc = float(min_alloc)
        self.horizon = int(horizon)
        self.now = int(now)
        self.window: List[ResourceLease] = []

    @classmethod
    def from_params(cls, params: EnvironmentParams, now: int = 0) -> 'LeaseQueue':
        return cls(params.capacity, params.min_alloc, params.horizon, now)

    def append(self, lease: ResourceLease) -> None:
        if lease.active:
            self.window.append(lease)

    def held_total(self) -> float:
        return math.fsum(lease.held_rate for lease in self.window)

    def __len__(self) -> int:
        return len(self.window)


def make_batch(slot: int, sizes: np.ndarray, params: EnvironmentParams) -> RequestBatch:
    """Build a batch from explicit request sizes, filling in both CPU demands."""
    sizes = np.asarray(sizes, dtype=np.float64)
    batch = RequestBatch(slot_index=int(slot), count=int(sizes.size), sizes=sizes)
    return replace(
        batch,
        cpu_demand_sp=service_demand(batch, params.kappa_sp, params.verbatim_service_demand),
        cpu_demand_bc=blockchain_demand(batch, params.kappa_bc, params.header_bytes,
                                        params.per_request_block_bytes),
    )


def sample_arrivals(rng: np.random.Generator, params: EnvironmentParams, slot: int = 0) -> RequestBatch:
    """Draw one slot's requests: truncated Poisson count, uniform byte sizes.

    Args:
        rng: Arrival random stream
        params: Environment parameters
        slot: Slot index stamped on the batch

    Returns:
        RequestBatch with both CPU demands populated
    """
    if params.arrival_rate <= 0:
        raise ConfigurationError('environment.arrival_rate', 'must be positive')
    if params.size_min <= 0:
        raise ConfigurationError('environment.size_min', 'must be positive')
    if params.size_min > params.size_max:
        raise ConfigurationError('environment.size_min', 'must not exceed environment.size_max')

    count = min(int(rng.poisson(params.arrival_rate)), params.arrival_cap)
    sizes = rng.uniform(params.size_min, params.size_max, size=count)
    return make_batch(slot, sizes, params)


def service_demand(batch: RequestBatch, kappa_sp: float, verbatim: bool = False) -> float:
    """CPU cycles to serve every request of the batch.

    The verbatim form multiplies by the request count a second time.
    """
    total = kappa_sp * float(np.sum(batch.sizes)) if batch.count else 0.0
    if verbatim:
        total *= batch.count
    return total


def blockchain_demand(batch: RequestBatch, kappa_bc: float, header_bytes: float,
                      per_request_bytes: float) -> float:
    """CPU cycles to process the slot's block: header plus per-request content."""
    return kappa_bc * (header_bytes + per_request_bytes * batch.count)


def processing_latency(demand_total: float, rate: float) -> float:
    """Slots needed to process `demand_total` cycles at `rate` cycles/slot."""
    if rate <= 0:
        raise UndefinedLatencyError(f'processing latency undefined at rate {rate}')
    return demand_total / rate


def lease_tick(queue: LeaseQueue, now: int) -> LeaseQueue:
    """Advance every lease to slot `now` and drop the ones no longer holding."""
    if now != queue.now + 1:
        raise ContractViolationError(f'lease queue at slot {queue.now} cannot tick to {now}')
    oldest = now - queue.horizon
    queue.window = [
        aged for aged in (lease.at(now) for lease in queue.window)
        if aged.active and aged.alloc_slot >= oldest
    ]
    queue.now = now
    return queue


def available_capacity(queue: LeaseQueue) -> float:
    """Capacity not held by active leases, in [0, F]."""
    return min(max(queue.capacity - queue.held_total(), 0.0), queue.capacity)


def full_state(queue: LeaseQueue, now: int) -> np.ndarray:
    """(remaining_slots, held_rate) for every slot t' in [now - T_max, now].

    Returns:
        Array of shape (T_max + 1, 2); row j describes slot now - T_max + j
    """
    length = queue.horizon + 1
    if length > MAX_FULL_STATE_LENGTH:
        raise ConfigurationError('environment', f'full state of length {length} is too large to build')
    state = np.zeros((length, 2), dtype=np.float64)
    start = now - queue.horizon
    for lease in queue.window:
        aged = lease.at(now)
        index = aged.alloc_slot - start
        if 0 <= index < length and aged.active:
            state[index] = (aged.remaining_slots, aged.held_rate)
    return state


@dataclass(frozen=True)
class ReducedState:
    """Two-feature normalised state fed to the networks."""

    avail_frac: float
    backlog_frac: float

    def as_array(self) -> np.ndarray:
        return np.array([self.avail_frac, self.backlog_frac], dtype=np.float64)


def reduced_state(queue: LeaseQueue, tau_max: float, verbatim: bool = False) -> ReducedState:
    """Available-capacity fraction and normalised remaining workload.

    The default weights each lease's remaining slots by the rate it holds,
    i.e. the time left if all outstanding work ran at full capacity.
    """
    if tau_max <= 0:
        raise ContractViolationError(f'tau_max must be positive, got {tau_max}')
    if verbatim:
        workload = math.fsum(lease.remaining_slots for lease in queue.window)
    else:
        workload = math.fsum(lease.remaining_slots * lease.held_rate for lease in queue.window)
    backlog = min(max(workload / queue.capacity / tau_max, 0.0), 1.0)
    avail = min(max(available_capacity(queue) / queue.capacity, 0.0), 1.0)
    return ReducedState(avail_frac=avail, backlog_frac=backlog)


@dataclass(frozen=True)
class StepOutcome:
    """Result of one slot."""

    reward: float
    cost: int
    latency_slots: float
    next_state: ReducedState
    rate: float = 0.0


def env_step(queue: LeaseQueue, batch: RequestBatch, action_rate: float, tau_max: float,
             verbatim_backlog: bool = False) -> StepOutcome:
    """Apply one allocation decision, then advance the queue by one slot.

    Raises:
        ContractViolationError: rate in (0, Δf), above F, or above the free capacity
    """
    rate = float(action_rate)
    if rate == 0.0:
        lease_tick(queue, queue.now + 1)
        return StepOutcome(reward=0.0, cost=1, latency_slots=0.0,
                           next_state=reduced_state(queue, tau_max, verbatim_backlog), rate=0.0)

    free = available_capacity(queue)
    slack = 1e-9 * queue.capacity
    if rate < queue.min_alloc:
        raise ContractViolationError(f'rate {rate} is below the minimum allocation {queue.min_alloc}')
    if rate > queue.capacity + slack or rate > free + slack:
        raise ContractViolationError(f'rate {rate} exceeds available capacity {free}')

    latency = processing_latency(batch.total_demand, rate)
    queue.append(ResourceLease.open(queue.now, rate, latency))
    lease_tick(queue, queue.now + 1)
    return StepOutcome(reward=-latency / tau_max, cost=0, latency_slots=latency,
                       next_state=reduced_state(queue, tau_max, verbatim_backlog), rate=rate)


ArrivalSampler = Callable[[np.random.Generator, EnvironmentParams, int], RequestBatch]


@dataclass(frozen=True)
class TwoLevelArrivals:
    """Toy request model: a fixed batch of small or large requests each slot."""

    count: int
    low_size: float
    high_size: float
    high_prob: float = 0.5

    def __call__(self, rng: np.random.Generator, params: EnvironmentParams, slot: int = 0) -> RequestBatch:
        size = self.high_size if rng.random() < self.high_prob else self.low_size
        return make_batch(slot, np.full(self.count, size), params)


class SlicingEnvironment:
    """One serving BS stepping slot by slot."""

    def __init__(self, params: EnvironmentParams, rng: np.random.Generator,
                 arrival_sampler: Optional[ArrivalSampler] = None,
                 record_trajectory: bool = False):
        """Initialize the environment.

        Args:
            params: Environment parameters (validated here)
            rng: Arrival random stream
            arrival_sampler: Replacement for the Poisson/uniform request model
            record_trajectory: Keep a per-slot record for dump_trajectory
        """
        params.validate()
        self.params = params
        self.rng = rng
        self.sampler = arrival_sampler or sample_arrivals
        self.tau_max = params.tau_max
        self.slot = 0
        self.queue = LeaseQueue.from_params(params, now=self.slot)
        self.record_trajectory = record_trajectory
        self.trajectory: List[Dict[str, Union[int, float]]] = []

    def reset(self) -> ReducedState:
        """Release every lease; the slot counter keeps running."""
        self.queue = LeaseQueue.from_params(self.params, now=self.slot)
        return self.observe()

    def observe(self) -> ReducedState:
        return reduced_state(self.queue, self.tau_max, self.params.verbatim_backlog)

    def available(self) -> float:
        return available_capacity(self.queue)

    def next_arrivals(self) -> RequestBatch:
        return self.sampler(self.rng, self.params, self.slot)

    def step(self, batch: RequestBatch, action_rate: float) -> StepOutcome:
        state = self.observe() if self.record_trajectory else None
        outcome = env_step(self.queue, batch, action_rate, self.tau_max, self.params.verbatim_backlog)
        if state is not None:
            self.trajectory.append({
                'slot': self.slot,
                'action': outcome.rate,
                'reward': outcome.reward,
                'cost': outcome.cost,
                'latency': outcome.latency_slots,
                'avail_frac': state.avail_frac,
                'backlog_frac': state.backlog_frac,
            })
        self.slot += 1
        return outcome

    def dump_trajectory(self, path: Union[str, Path]) -> Path:
        """Write recorded slots as JSON lines."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            for record in self.trajectory:
                f.write(json.dumps(record) + '\n')
        logger.info("Saved %d trajectory records to %s", len(self.trajectory), path)
        return path
