"""Counter-based random streams.

Every random draw in the package comes from a Philox generator keyed by a
master seed, a tag and a tuple of integer indices, so that work items (a
replicate, a bootstrap sample, a fold plan) can be computed in any order or
process and still see the same numbers.
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _tag_word(tag: str) -> int:
    return zlib.crc32(tag.encode("utf-8"))


def stream(seed: int, tag: str, *index: int) -> np.random.Generator:
    """Return the generator for ``(seed, tag, *index)``."""
    words = [int(seed) & _MASK64, _tag_word(tag)] + [int(i) & _MASK64 for i in index]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))


def child_seed(seed: int, tag: str, *index: int) -> int:
    """Derive a 63-bit integer seed, for APIs that take a plain seed."""
    return int(stream(seed, tag, *index).integers(0, 2**63 - 1))
