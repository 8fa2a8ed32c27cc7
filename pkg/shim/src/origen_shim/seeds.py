"""Per-image seed derivation (blake2b; stable across processes)."""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(*parts) -> int:
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        data = (part.encode("utf-8") if isinstance(part, str)
                else int(part).to_bytes(16, "little", signed=True))
        h.update(len(data).to_bytes(4, "little"))
        h.update(data)
    return int.from_bytes(h.digest(), "little")


def rng_from_seed(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))
