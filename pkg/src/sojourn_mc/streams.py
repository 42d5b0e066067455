"""Counter-based random number streams.

All randomness in the package flows from a single integer seed. Independent
streams are derived by keying a Philox counter generator with
SeedSequence((seed, *key)); distinct keys give statistically independent
streams and the same key always reproduces the same stream, which makes
replication-parallel Monte Carlo deterministic regardless of execution order.
"""
from __future__ import annotations

import numpy as np

# Fixed role keys so different consumers of the same seed never collide.
ROLE_PATH = 1
ROLE_HORIZON = 2
ROLE_MIX = 3


def seed_sequence(seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence((int(seed),) + tuple(int(k) for k in key))


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator keyed by (seed, *key)."""
    return np.random.Generator(np.random.Philox(seed_sequence(seed, *key)))


def float_key(x: float) -> int:
    """Stable integer key for a float (bit pattern), for keying streams by level."""
    return int(np.float64(x).view(np.uint64))
