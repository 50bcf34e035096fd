"""Hierarchical, named random streams.

Every stage of a campaign derives its own generator from the master seed
and a path of stage names / indices, so results are reproducible no matter
how stages are scheduled (serial, pooled, resumed).
"""

from __future__ import annotations

import zlib

import numpy as np


def _path_entropy(part: int | str) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError(f"stream path indices must be >= 0, got {part}")
        return int(part)
    return zlib.crc32(part.encode("utf-8"))


def substream(master_seed: int, *path: int | str) -> np.random.Generator:
    """Derive an independent generator for ``path`` under ``master_seed``.

    The same (seed, path) always yields the same stream; distinct paths
    yield streams that are independent for practical purposes.
    """
    entropy = [int(master_seed)] + [_path_entropy(p) for p in path]
    return np.random.default_rng(np.random.SeedSequence(entropy))
