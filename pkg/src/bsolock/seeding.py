"""Reproducible random substreams.

Every consumer of randomness asks for a stream keyed on (master seed, label,
indices...).  Keys are turned into a SeedSequence spawn key and fed to a
Philox counter-based generator, so a stream depends only on its key and never
on how many other streams were drawn before it.
"""
from __future__ import annotations

import zlib

import numpy as np

SEED_MASK = (1 << 64) - 1


def label_code(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


def substream(master_seed: int, label: str, *index: int) -> np.random.Generator:
    if master_seed < 0 or master_seed > SEED_MASK:
        raise ValueError("master seed must be an unsigned 64-bit integer")
    key = (label_code(label),) + tuple(int(i) for i in index)
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(seq))
