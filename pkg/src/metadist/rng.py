"""Named random sub-streams derived from one integer seed."""

from __future__ import annotations

import zlib

import numpy as np

STREAMS = ("sampling", "splits", "tuner", "noise")


def seed_sequence(seed: int, name: str, *extra: int) -> np.random.SeedSequence:
    if name not in STREAMS:
        raise ValueError(f"unknown random stream {name!r}")
    return np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(name.encode()), *map(int, extra)])


def stream(seed: int, name: str, *extra: int) -> np.random.Generator:
    """Generator for ``name`` under ``seed``; ``extra`` integers select a child stream."""
    return np.random.default_rng(seed_sequence(seed, name, *extra))
