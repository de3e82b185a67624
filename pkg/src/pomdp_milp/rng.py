"""Seeded random-number helpers.

All randomness in the package flows through these helpers so that every
generator, simulation, and CLI command is a pure function of its seed.
Per-run streams are derived as ``seed ^ run_index``, which keeps independent
Monte-Carlo runs reproducible and embarrassingly parallel.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_run_seed(seed: int, run_index: int) -> int:
    """Seed for the ``run_index``-th independent run of a batch."""
    return (int(seed) ^ int(run_index)) & _MASK64


def make_rng(seed: int, run_index: int = 0) -> np.random.Generator:
    """A PCG64 generator for one named run."""
    return np.random.default_rng(derive_run_seed(seed, run_index))
