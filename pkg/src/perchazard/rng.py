"""Reproducible random streams.

Every replica owns a fixed set of named, statistically independent streams
derived from ``(master_seed, replica)``; results never depend on how replicas
are scheduled across workers.
"""

from __future__ import annotations

import numpy as np

STREAMS = ("lattice", "driver", "volatility", "crash")


def stream(master_seed: int, replica: int, name: str) -> np.random.Generator:
    """Return the generator for one named stream of one replica."""
    try:
        idx = STREAMS.index(name)
    except ValueError:
        raise KeyError(f"unknown stream {name!r}; expected one of {STREAMS}") from None
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(replica), idx))
    return np.random.Generator(np.random.PCG64(ss))


def replica_streams(master_seed: int, replica: int = 0) -> dict[str, np.random.Generator]:
    return {name: stream(master_seed, replica, name) for name in STREAMS}


def as_generator(seed) -> np.random.Generator:
    """Accept a Generator, an int seed or None (fresh entropy)."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
