"""Stable seed derivation.

Every stream of randomness in a run is keyed by a 64-bit seed hashed from
(seed-base, lane, indices). blake2b keeps the mapping identical across
processes and platforms, unlike Python's salted hash().
"""

from __future__ import annotations

import hashlib

import numpy as np

_TAG_INT = b"i"
_TAG_STR = b"s"
_TAG_BYTES = b"b"


def derive_seed(*parts: int | str | bytes) -> int:
    """Hash heterogeneous parts into an unsigned 64-bit seed.

    Parts are length-prefixed and type-tagged so ("ab", "c") and ("a", "bc")
    never collide.
    """
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        if isinstance(part, bytes):
            tag, data = _TAG_BYTES, part
        elif isinstance(part, str):
            tag, data = _TAG_STR, part.encode("utf-8")
        elif isinstance(part, (int, np.integer)):
            tag, data = _TAG_INT, int(part).to_bytes(16, "little", signed=True)
        else:
            raise TypeError(f"unhashable seed part of type {type(part).__name__}")
        h.update(tag)
        h.update(len(data).to_bytes(4, "little"))
        h.update(data)
    return int.from_bytes(h.digest(), "little")


def rng_from_seed(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))
