"""Derived random streams.

Every stochastic step in the package draws from a generator derived from the
single experiment seed, a purpose tag and optional indices. Streams therefore
do not depend on how work is batched or scheduled.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream_key(seed: int, tag: str, *index: int) -> int:
    """128-bit integer key for ``(seed, tag, index...)``."""
    payload = ":".join([str(int(seed)), tag, *(str(int(i)) for i in index)])
    digest = hashlib.blake2b(payload.encode("utf-8"), digest_size=16).digest()
    return int.from_bytes(digest, "big")


def derive_rng(seed: int, tag: str, *index: int) -> np.random.Generator:
    """Independent PCG64 generator for the given purpose."""
    return np.random.Generator(np.random.PCG64(stream_key(seed, tag, *index)))
