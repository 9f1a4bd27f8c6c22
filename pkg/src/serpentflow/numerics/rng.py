"""Seeded random streams.

All randomness flows through numpy's Philox counter-based generator keyed by a
``SeedSequence`` built from an integer seed plus a stream label, so separate
concerns (shuffling, noise, time draws, initialisation) never share state.
"""

from __future__ import annotations

import zlib

import numpy as np


def _label(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    value = int(part)
    if value < 0:
        raise ValueError(f"seed components must be non-negative, got {value}")
    return value


def make_rng(seed: int, *stream) -> np.random.Generator:
    """Return an independent Philox generator for ``(seed, *stream)``."""
    entropy = [_label(seed)] + [_label(s) for s in stream]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
