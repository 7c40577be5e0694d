"""
Seeded generators. Every stream is a PCG64 ``numpy.random.Generator``, so a
seed tuple always yields the same sequence regardless of platform or thread.
"""

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def epoch_rng(seed: int, epoch: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, epoch])))


def sample_rng(seed: int, epoch: int, index: int) -> np.random.Generator:
    """Independent sub-stream for one sample's augmentation in one epoch."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, epoch, index])))
