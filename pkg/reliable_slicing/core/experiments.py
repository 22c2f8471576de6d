#!/usr/bin/env python3
"""
Experiment Orchestration

Runs the reputation-tracking, training, evaluation and matched-seed
experiments described by an ExperimentConfig and persists their logs under
the configured output directory.
"""

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from ..errors import CheckpointError, ConfigurationError
from ..utils.config import ExperimentConfig
from ..utils.seeding import child_generator
from .agent import MODES
from .environment import ArrivalSampler
from .reputation import track_reputation
from .training import (EpisodeRecord, TrainingSession, evaluate_policy, records_to_frame,
                       train, write_training_log)

logger = logging.getLogger(__name__)

SUMMARY_WINDOW = 10


def normalize_mode(mode: str) -> str:
    """Accept the command-line spelling ('min-latency') as well as 'min_latency'."""
    normalized = mode.replace('-', '_')
    if normalized not in MODES:
        raise ConfigurationError('mode', f"expected one of {', '.join(MODES)}, got '{mode}'")
    return normalized


def run_name(mode: str, attacks: bool = False) -> str:
    return normalize_mode(mode) + ('_attacks' if attacks else '')


def _json_number(value: float) -> Optional[float]:
    return None if value is None or not math.isfinite(value) else float(value)


@dataclass(frozen=True)
class TrainingRun:
    """Outcome of one (mode, attacks, seed) training cell."""

    mode: str
    attacks: bool
    seed: int
    records: List[EpisodeRecord]
    summary: Dict[str, Any]


class ExperimentRunner:
    """Seeded experiment orchestration over one configuration."""

    def __init__(self, config: ExperimentConfig, arrival_sampler: Optional[ArrivalSampler] = None):
        """Initialize the runner.

        Args:
            config: Validated experiment configuration
            arrival_sampler: Replacement request model (toy environments)
        """
        self.config = config
        self.arrival_sampler = arrival_sampler
        self.output_dir = Path(config.experiment.output_dir)

    def run_reputation_experiment(self) -> Dict[str, pd.DataFrame]:
        """One reputation trace per configured profile.

        Returns:
            Profile name to DataFrame (slot, bs_id, reputation)
        """
        out_dir = self.output_dir / 'reputation'
        out_dir.mkdir(parents=True, exist_ok=True)
        seed = self.config.experiment.seed

        traces = {}
        for index, profile in enumerate(self.config.reputation_profiles):
            trace = track_reputation(profile, self.config.reputation, child_generator(seed, index))
            path = out_dir / f'trace_{profile.name}.csv'
            trace.to_csv(path, index=False)
            logger.info("Saved reputation trace '%s' to %s", profile.name, path)
            traces[profile.name] = trace
        return traces

    def run_directory(self, mode: str, attacks: bool = False) -> Path:
        return self.output_dir / 'train' / run_name(mode, attacks)

    def _session(self, mode: str, attacks: bool, seed: int,
                 record_trajectory: bool = False) -> TrainingSession:
        return TrainingSession.create(
            self.config.environment, self.config.agent, seed,
            mode=normalize_mode(mode), attacks=attacks,
            reputation_params=self.config.reputation,
            attack_profiles=self.config.attacks,
            arrival_sampler=self.arrival_sampler,
            record_trajectory=record_trajectory,
        )

    def train_cell(self, mode: str, attacks: bool = False, seed: Optional[int] = None,
                   checkpoint_path: Optional[Path] = None) -> TrainingRun:
        """Train one cell without writing logs (checkpoint optional)."""
        seed = self.config.experiment.seed if seed is None else seed
        mode = normalize_mode(mode)
        session = self._session(mode, attacks, seed)
        records = train(session, checkpoint_path)
        summary = self.summarize(records)
        summary.update({'mode': mode, 'attacks': attacks, 'seed': seed})
        return TrainingRun(mode, attacks, seed, records, summary)

    def run_training(self, mode: str = 'constrained', attacks: bool = False) -> TrainingRun:
        """Train one mode and write training_log.csv, summary.json and checkpoint.json."""
        run_dir = self.run_directory(mode, attacks)
        run_dir.mkdir(parents=True, exist_ok=True)
        run = self.train_cell(mode, attacks, checkpoint_path=run_dir / 'checkpoint.json')
        write_training_log(run.records, run_dir / 'training_log.csv')
        self._write_json(run.summary, run_dir / 'summary.json')
        return run

    def run_evaluation(self, mode: str = 'constrained', attacks: bool = False) -> List[EpisodeRecord]:
        """Greedy rollouts of a trained checkpoint.

        Raises:
            CheckpointError: the run has not been trained yet
        """
        run_dir = self.run_directory(mode, attacks)
        checkpoint = run_dir / 'checkpoint.json'
        if not checkpoint.is_file():
            raise CheckpointError(f"no checkpoint for run '{run_name(mode, attacks)}' at {checkpoint}")

        experiment = self.config.experiment
        session = self._session(mode, attacks, experiment.seed, record_trajectory=experiment.trace)
        session.agent.restore(checkpoint)
        records = evaluate_policy(session, experiment.eval_episodes)

        records_to_frame(records).to_csv(run_dir / 'evaluation.csv', index=False)
        summary = self.summarize(records, window=len(records) or 1)
        summary.update({'mode': normalize_mode(mode), 'attacks': attacks, 'seed': experiment.seed})
        self._write_json(summary, run_dir / 'evaluation.json')
        if experiment.trace:
            session.env.dump_trajectory(run_dir / 'trajectory.jsonl')
        logger.info("Evaluated %s over %d episodes: DoS %.4f", run_name(mode, attacks),
                    len(records), summary['dos_rate'] or 0.0)
        return records

    def run_matched_seeds(self, mode: str, seeds: Optional[Sequence[int]] = None,
                          attacks: bool = False, max_workers: Optional[int] = None) -> List[TrainingRun]:
        """Train one cell per seed, one thread per cell.

        Results are ordered by seed and written to matched_seeds.csv.
        """
        seeds = list(self.config.experiment.matched_seeds if seeds is None else seeds)
        workers = max_workers or self.config.experiment.max_workers
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(self.train_cell, mode, attacks, seed) for seed in seeds]
            runs = [future.result() for future in futures]

        run_dir = self.run_directory(mode, attacks)
        run_dir.mkdir(parents=True, exist_ok=True)
        table = pd.DataFrame([
            {key: run.summary[key] for key in ('seed', 'mean_latency_norm', 'dos_rate', 'final_dual')}
            for run in runs
        ])
        table.to_csv(run_dir / 'matched_seeds.csv', index=False)
        logger.info("Saved matched-seed summary for %s to %s", run_name(mode, attacks), run_dir)
        return runs

    @staticmethod
    def summarize(records: Sequence[EpisodeRecord], window: int = SUMMARY_WINDOW) -> Dict[str, Any]:
        """Means over the last `window` episodes plus the final dual.

        Values that are undefined (no episodes, never allocated) are None.
        """
        if not records:
            return {'episodes': 0, 'window': 0, 'mean_latency_norm': None,
                    'dos_rate': None, 'mean_reward': None, 'final_dual': None}
        tail = records_to_frame(records[-window:], columns=['mean_latency_norm', 'dos_rate', 'mean_reward'])
        return {
            'episodes': len(records),
            'window': len(tail),
            'mean_latency_norm': _json_number(tail['mean_latency_norm'].mean()),
            'dos_rate': _json_number(tail['dos_rate'].mean()),
            'mean_reward': _json_number(tail['mean_reward'].mean()),
            'final_dual': _json_number(records[-1].dual),
        }

    @staticmethod
    def _write_json(payload: Dict[str, Any], path: Path) -> Path:
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(payload, f, indent=2, sort_keys=True)
        logger.info("Saved %s", path)
        return path

