"""Deterministic, splittable random streams.

Every stochastic routine in this package draws from a counter-based Philox
generator keyed by a master seed plus an integer path (e.g. ``(purpose,
trial)``).  Streams with distinct paths are statistically independent, so
trials can run in any order, or concurrently, and still reproduce bit-for-bit.
"""

from __future__ import annotations

import numpy as np

# Fixed purpose slots for experiment-level streams.  Keeping them in one place
# avoids accidental stream collisions between pipeline stages.
POINTS = 0
NOISE = 1
ORACLE = 2
CROSS_VALIDATION = 3
ERROR_L2 = 4
ERROR_LINF = 5
SUPPORT = 6


def stream(seed: int, *path: int) -> np.random.Generator:
    """Return the Philox generator keyed by ``(seed, *path)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))
