"""Seeded RNG streams for reproducible ensembles.

Every ensemble member owns a generator spawned deterministically from
(seed, member index), so member i draws the same noise sequence no matter
how large the ensemble is or in what order members are processed.
"""

from __future__ import annotations

import numpy as np

# Budget for one materialized noise block, in float64 elements (~128 MB).
_CHUNK_BUDGET = 16_000_000


def member_generators(seed: int, n: int) -> list[np.random.Generator]:
    """One independent generator per ensemble member, derived from seed."""
    root = np.random.SeedSequence(int(seed))
    return [np.random.default_rng(child) for child in root.spawn(int(n))]


def run_generator(seed: int, tag: int = 0) -> np.random.Generator:
    """A run-level generator kept separate from the member streams."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), 0x5EED + int(tag)]))


def chunk_steps(n_steps: int, ensemble: int, width: int) -> int:
    """Steps per noise block so a block stays within the memory budget."""
    per_step = max(1, ensemble * width)
    return max(1, min(int(n_steps), _CHUNK_BUDGET // per_step))


def stacked_normals(gens: list[np.random.Generator], steps: int, width: int) -> np.ndarray:
    """Draw (steps, width) normals from each member stream; shape (steps, n, width).

    Each member consumes its own stream contiguously, so draws are invariant
    to how steps are chunked.
    """
    out = np.empty((steps, len(gens), width))
    for i, g in enumerate(gens):
        out[:, i, :] = g.standard_normal((steps, width))
    return out
