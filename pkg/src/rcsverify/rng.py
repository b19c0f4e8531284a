"""Splittable, counter-based random streams.

A stream is addressed by ``(seed, tag, *keys)``. Each address maps to an
independent Philox generator through :class:`numpy.random.SeedSequence`
spawn keys, so a value drawn at one address never depends on how many
other addresses were visited before it.
"""
from __future__ import annotations

import zlib

import numpy as np


def _word(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFF_FFFFFFFF
    return zlib.crc32(str(part).encode("utf-8"))


def stream(seed: int, tag: str, *keys) -> np.random.Generator:
    """Return the generator living at address ``(seed, tag, *keys)``."""
    ss = np.random.SeedSequence(
        entropy=int(seed) & 0xFFFFFFFF_FFFFFFFF,
        spawn_key=tuple(_word(k) for k in (tag, *keys)),
    )
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, tag: str, *keys) -> int:
    """A 63-bit integer seed derived from an address, for handing to callers."""
    return int(stream(seed, tag, *keys).integers(0, 2**63 - 1))
