"""Deterministic random-stream derivation.

Every stochastic component draws from its own named stream derived from
(master seed, purpose, index). Streams are stable across runs, platforms
and worker counts, so adding parallelism never reshuffles results.
"""
from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def purpose_key(purpose: str) -> int:
    """Map a purpose label to a stable 64-bit integer."""
    digest = hashlib.sha256(purpose.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def seed_sequence(master: int, purpose: str, index: int = 0) -> np.random.SeedSequence:
    if master < 0:
        raise ValueError("master seed must be non-negative")
    if index < 0:
        raise ValueError("stream index must be non-negative")
    return np.random.SeedSequence((master & _MASK64, purpose_key(purpose), index))


def stream(master: int, purpose: str, index: int = 0) -> np.random.Generator:
    """Dedicated PCG64 generator for (master, purpose, index)."""
    return np.random.Generator(np.random.PCG64(seed_sequence(master, purpose, index)))
