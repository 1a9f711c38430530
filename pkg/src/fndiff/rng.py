"""Deterministic, restart-safe random streams.

All randomness in the package flows through counter-based Philox generators
keyed by explicit integer/string labels, never through global RNG state.
The same key always yields the same stream, in any process, regardless of
what was drawn before.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["derive_key", "stream", "uniform", "normal", "randint"]

_MASK64 = (1 << 64) - 1


def derive_key(*parts) -> int:
    """Hash an arbitrary tuple of ints/strings into a 64-bit stream key.

    Stable across processes and platforms (SHA-256 based, no Python hash
    randomization involved).
    """
    h = hashlib.sha256()
    for p in parts:
        if isinstance(p, (int, np.integer)):
            h.update(b"i" + int(p).to_bytes(16, "little", signed=True))
        elif isinstance(p, str):
            h.update(b"s" + p.encode("utf-8") + b"\x00")
        else:
            raise TypeError(f"rng key parts must be int or str, got {type(p).__name__}")
    return int.from_bytes(h.digest()[:8], "little") & _MASK64


def stream(*parts) -> np.random.Generator:
    """Return a fresh Philox generator for the given key parts."""
    return np.random.Generator(np.random.Philox(key=derive_key(*parts)))


def uniform(lo: float, hi: float, size, *parts) -> np.ndarray:
    return stream(*parts).uniform(lo, hi, size=size)


def normal(size, *parts) -> np.ndarray:
    return stream(*parts).standard_normal(size=size)


def randint(n: int, size, *parts) -> np.ndarray:
    return stream(*parts).integers(0, n, size=size)
