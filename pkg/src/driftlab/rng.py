"""Counter-based random streams keyed by a run seed and a stream name.

Every consumer asks for its own named stream, so the numbers drawn by one
module never depend on how many numbers another module consumed or on the
order in which parallel workers run.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream_key(name: str) -> int:
    return int.from_bytes(hashlib.sha256(name.encode()).digest()[:8], "little")


def make_rng(seed: int, stream: str) -> np.random.Generator:
    """Philox generator for ``(seed, stream)``."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, stream_key(stream)])
    return np.random.Generator(np.random.Philox(ss))
