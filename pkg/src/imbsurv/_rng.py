"""Seeded random streams.

All randomness goes through numpy's PCG64 bit generator seeded by a
``SeedSequence``. PCG64 output is specified bit-for-bit and does not depend
on the platform, so a (seed, stream key) pair identifies one stream
everywhere. Independent consumers (pipeline stages, trees, CV cells) derive
their own stream from a tuple key instead of sharing a generator.
"""

from __future__ import annotations

import numpy as np

MAX_SEED = 2**64 - 1


def check_seed(seed) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be in [0, 2**64), got {seed}")
    return seed


def stream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for ``seed`` and stream ``key``."""
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def child_seed(seed: int, *key: int) -> int:
    """A 64-bit seed derived from (seed, key), for handing to sub-components."""
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def standard_normal(rng: np.random.Generator, size: int) -> np.ndarray:
    """Box-Muller normals computed from the uniform stream.

    Uses ``1 - u`` for the radius draw so the log argument lies in (0, 1].
    """
    m = (size + 1) // 2
    u1 = 1.0 - rng.random(m)
    u2 = rng.random(m)
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    z = np.empty(2 * m)
    z[0::2] = r * np.cos(theta)
    z[1::2] = r * np.sin(theta)
    return z[:size]
