"""Deterministic RNG substreams.

All randomness in a run flows from one top-level seed through named
substreams so that per-entity draws are independent of processing order.
Stream identity is hashed with SHA-256, which is stable across platforms
and Python versions (unlike the builtin ``hash``).
"""

from __future__ import annotations

import hashlib
import random


def hash64(*parts: object) -> int:
    """Map a path of labels to a stable 64-bit integer."""
    text = ":".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def substream(seed: int, *path: object) -> random.Random:
    """Return an independent ``random.Random`` for (seed, *path)."""
    return random.Random(hash64(seed, *path))


def uniform_value(seed: int, *path: object, n: int = 64) -> int:
    """Stable uniform draw in [0, n) for (seed, *path); n must divide 2**64."""
    if (1 << 64) % n != 0:
        raise ValueError("n must divide 2**64 for an exactly uniform draw")
    return hash64(seed, *path) % n
