"""Counter-keyed random streams.

Every stochastic quantity is drawn from PCG64 seeded by
``SeedSequence(seed, spawn_key=key)``. The key names the purpose and the trial
index, so a trial's draws do not depend on how trials are scheduled.
"""
from __future__ import annotations

import numpy as np

# purpose tags used as the first spawn-key word
FAKE_DRAWS = 1
BER_TRIAL = 2
ML_TRIAL = 3


def substream(seed: int, *key: int) -> np.random.Generator:
    if seed < 0 or seed >= 2 ** 64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))))


def complex_normal(rng: np.random.Generator, shape, std: float = 1.0) -> np.ndarray:
    """Circular complex Gaussian with E|z|^2 = std^2."""
    z = rng.standard_normal(shape + (2,) if isinstance(shape, tuple) else (shape, 2))
    return std * (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)
