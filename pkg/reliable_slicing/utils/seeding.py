#!/usr/bin/env python3
"""
Deterministic random streams derived from one root seed.
"""

from typing import Dict, Sequence

import numpy as np

# Order matters: appending a name keeps every existing stream unchanged.
STREAM_NAMES = (
    'arrivals',
    'init',
    'noise',
    'replay',
    'miner',
    'attacks',
)


def spawn_streams(seed: int, names: Sequence[str] = STREAM_NAMES) -> Dict[str, np.random.Generator]:
    """Split a root seed into independent named generators.

    Args:
        seed: Root seed (non-negative integer)
        names: Stream names, one child seed each

    Returns:
        Dictionary of stream name to numpy Generator
    """
    children = np.random.SeedSequence(int(seed)).spawn(len(names))
    return {name: np.random.default_rng(child) for name, child in zip(names, children)}


def child_generator(seed: int, *path: int) -> np.random.Generator:
    """Generator keyed by a root seed and an integer path (e.g. profile index)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *[int(p) for p in path]]))
