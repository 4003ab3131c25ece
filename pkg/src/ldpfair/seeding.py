"""Deterministic derivation of child seeds from a root seed and a cell path."""

from __future__ import annotations

import zlib

import numpy as np

_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def _as_int(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & _MASK
    if isinstance(part, float):
        return int(np.float64(part).view(np.uint64))
    # Names (mechanism, attribute) hash by content, not by position in a list,
    # so adding a mechanism never shifts another one's stream.
    return zlib.crc32(str(part).encode("utf-8"))


def mix_seed(*parts) -> int:
    """Fold ``parts`` into one 64-bit seed; order matters."""
    h = 0
    for part in parts:
        h = splitmix64(h ^ _as_int(part))
    return h


def derived_rng(*parts) -> np.random.Generator:
    return np.random.default_rng(mix_seed(*parts))
