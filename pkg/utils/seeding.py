"""
Seeded random number generation.
Every random draw in the toolkit goes through a Generator created here.
"""

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    """Return a 64-bit PCG generator seeded with `seed`."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def derive_seed(seed: int, index: int) -> int:
    """Per-item seed for trial / grid point `index` (seed XOR index)."""
    return int(seed) ^ int(index)
