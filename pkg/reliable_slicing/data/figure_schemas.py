#!/usr/bin/env python3
"""
Figure Data Schemas

Column contract of every plot-ready CSV written by the figure exporter and
of the logs they are built from.
"""

from typing import Any, Dict

# Information about every emitted figure file
FIGURE_DATA_INFO: Dict[str, Dict[str, Any]] = {
    'fig2': {
        'description': 'Reputation of the tracked BS per slot, one file per profile (fig2_<profile>.csv)',
        'columns': ['slot', 'reputation'],
        'sources': ['reputation/trace_<profile>.csv'],
    },
    'fig3a': {
        'description': 'Mean normalised latency per episode, constrained agent against both baselines',
        'columns': ['episode', 'latency_constrained', 'latency_min_latency', 'latency_min_dos'],
        'sources': ['train/constrained', 'train/min_latency', 'train/min_dos'],
    },
    'fig3b': {
        'description': 'Empirical DoS rate per episode, constrained agent against both baselines',
        'columns': ['episode', 'dos_constrained', 'dos_min_latency', 'dos_min_dos'],
        'sources': ['train/constrained', 'train/min_latency', 'train/min_dos'],
    },
    'fig4a': {
        'description': 'Episode-mean reward and cost of the constrained agent with and without attacks',
        'columns': ['episode', 'reward_no_attack', 'reward_attacks', 'cost_no_attack', 'cost_attacks'],
        'sources': ['train/constrained', 'train/constrained_attacks'],
    },
    'fig4b': {
        'description': 'Dual variable and DoS rate of the constrained agent with and without attacks',
        'columns': ['episode', 'dual_no_attack', 'dual_attacks', 'dos_no_attack', 'dos_attacks'],
        'sources': ['train/constrained', 'train/constrained_attacks'],
    },
}

# Input logs, as written by the experiment runner
LOG_SCHEMAS: Dict[str, Dict[str, Any]] = {
    'training_log': {
        'description': 'Per-episode training metrics (train/<run>/training_log.csv)',
        'columns': ['episode', 'mean_latency_norm', 'dos_rate', 'dual',
                    'critic_loss_r', 'critic_loss_c', 'actor_obj'],
    },
    'reputation_trace': {
        'description': 'Reputation trace (reputation/trace_<profile>.csv)',
        'columns': ['slot', 'bs_id', 'reputation'],
    },
}


def get_figure_schema(figure_name: str) -> Dict[str, Any]:
    """Schema entry for one figure.

    Args:
        figure_name: Key of FIGURE_DATA_INFO, e.g. 'fig3b'

    Returns:
        Dictionary with description, columns and sources
    """
    if figure_name not in FIGURE_DATA_INFO:
        raise ValueError(f"Figure '{figure_name}' not found. Available: {list(FIGURE_DATA_INFO.keys())}")
    return FIGURE_DATA_INFO[figure_name]
