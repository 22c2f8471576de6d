#!/usr/bin/env python3
"""
Figure Data Export

Turns reputation traces and training logs into one plot-ready CSV per
figure. Rendering is left to any plotting tool.
"""

import logging
from pathlib import Path
from typing import Dict, List, Sequence, Union

import pandas as pd

from ..data.figure_schemas import LOG_SCHEMAS, get_figure_schema
from ..errors import FigureDataError

logger = logging.getLogger(__name__)

BASELINE_RUNS = {
    'constrained': 'constrained',
    'min_latency': 'min_latency',
    'min_dos': 'min_dos',
}
ATTACK_RUNS = {
    'no_attack': 'constrained',
    'attacks': 'constrained_attacks',
}
RUN_COMMANDS = {
    'constrained': 'sim train --mode constrained',
    'min_latency': 'sim train --mode min-latency',
    'min_dos': 'sim train --mode min-dos',
    'constrained_attacks': 'sim train --mode constrained --attacks',
}


class FigureDataExporter:
    """Builds fig2_*.csv, fig3a/b.csv and fig4a/b.csv from an output tree."""

    def __init__(self, output_dir: Union[str, Path], profile_names: Sequence[str]):
        """Initialize the exporter.

        Args:
            output_dir: Root directory holding reputation/ and train/
            profile_names: Reputation profiles expected in reputation/
        """
        self.output_dir = Path(output_dir)
        self.profile_names = list(profile_names)
        self.figures_dir = self.output_dir / 'figures'

    def _trace_path(self, profile: str) -> Path:
        return self.output_dir / 'reputation' / f'trace_{profile}.csv'

    def _log_path(self, run: str) -> Path:
        return self.output_dir / 'train' / run / 'training_log.csv'

    def missing_inputs(self) -> List[str]:
        """Commands whose output is required but absent."""
        missing = []
        if any(not self._trace_path(p).is_file() for p in self.profile_names):
            missing.append('sim reputation')
        for run, command in RUN_COMMANDS.items():
            if not self._log_path(run).is_file():
                missing.append(command)
        return missing

    def _read_log(self, run: str) -> pd.DataFrame:
        frame = pd.read_csv(self._log_path(run))
        expected = LOG_SCHEMAS['training_log']['columns']
        if list(frame.columns) != expected:
            raise FigureDataError(f'training log of {run} has columns {list(frame.columns)}, expected {expected}')
        return frame

    def _combine(self, runs: Dict[str, str], columns: Dict[str, str]) -> pd.DataFrame:
        """Outer-join per-run columns on the episode index.

        `columns` maps a log column to the output prefix, e.g. dos_rate -> dos.
        """
        combined = None
        for label, run in runs.items():
            log = self._read_log(run)
            part = pd.DataFrame({'episode': log['episode']})
            for source, prefix in columns.items():
                if source == 'mean_reward':
                    # reward is -latency on served slots and 0 on denied ones
                    part[f'{prefix}_{label}'] = -log['mean_latency_norm'].fillna(0.0) * (1.0 - log['dos_rate'])
                else:
                    part[f'{prefix}_{label}'] = log[source]
            combined = part if combined is None else combined.merge(part, on='episode', how='outer')
        return combined.sort_values('episode').reset_index(drop=True)

    def build_figures(self) -> Dict[str, pd.DataFrame]:
        """All figure tables keyed by file stem."""
        missing = self.missing_inputs()
        if missing:
            raise FigureDataError('missing runs, execute first: ' + '; '.join(missing))

        figures: Dict[str, pd.DataFrame] = {}
        for profile in self.profile_names:
            trace = pd.read_csv(self._trace_path(profile))
            figures[f'fig2_{profile}'] = trace[get_figure_schema('fig2')['columns']]

        figures['fig3a'] = self._combine(BASELINE_RUNS, {'mean_latency_norm': 'latency'})
        figures['fig3b'] = self._combine(BASELINE_RUNS, {'dos_rate': 'dos'})
        fig4a = self._combine(ATTACK_RUNS, {'mean_reward': 'reward', 'dos_rate': 'cost'})
        figures['fig4a'] = fig4a[get_figure_schema('fig4a')['columns']]
        fig4b = self._combine(ATTACK_RUNS, {'dual': 'dual', 'dos_rate': 'dos'})
        figures['fig4b'] = fig4b[get_figure_schema('fig4b')['columns']]
        return figures

    def export_figure_data(self) -> Dict[str, Path]:
        """Write every figure CSV under figures/.

        Raises:
            FigureDataError: a required log is missing (the message lists the runs)
        """
        figures = self.build_figures()
        self.figures_dir.mkdir(parents=True, exist_ok=True)
        paths = {}
        for name, frame in figures.items():
            path = self.figures_dir / f'{name}.csv'
            frame.to_csv(path, index=False)
            paths[name] = path
        logger.info("Saved %d figure files to %s", len(paths), self.figures_dir)
        return paths
