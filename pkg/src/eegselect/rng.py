"""Deterministic named random substreams.

Every stochastic component draws from a generator derived from one master
seed plus a tuple of string/int tags. Streams with distinct tags are
statistically independent, and results never depend on thread scheduling
or on how many draws another component made.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _tag_word(tag: object) -> int:
    """Stable 64-bit word for a tag (hash() is salted per process, sha256 is not)."""
    digest = hashlib.sha256(repr(tag).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(master_seed: int, *tags: object) -> np.random.Generator:
    """Return an independent Generator for (master_seed, *tags).

    The same arguments always yield the same stream, on any platform.
    """
    words = [int(master_seed) & _MASK64] + [_tag_word(t) for t in tags]
    return np.random.default_rng(np.random.SeedSequence(words))
