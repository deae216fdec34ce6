"""Deterministic random-stream derivation.

All randomness in the toolkit flows from a single 64-bit seed.  Consumers
never share a generator; instead each site derives its own independent
substream from the seed plus a tuple of labels (strings and integers),
e.g. ``substream(seed, "paint", frame, camera_id, level)``.  Label strings
are hashed with BLAKE2 so the mapping is stable across platforms and runs.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _label_to_int(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label) & 0xFFFFFFFFFFFFFFFF
    if isinstance(label, str):
        digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")
    raise TypeError(f"substream labels must be int or str, got {type(label).__name__}")


def substream(seed: int, *labels) -> np.random.Generator:
    """Derive an independent generator from ``seed`` and a label path."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [_label_to_int(x) for x in labels]
    return np.random.default_rng(np.random.SeedSequence(entropy))
