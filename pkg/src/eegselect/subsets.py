"""Canonical channel subsets.

A ChannelSubset is an immutable, sorted tuple of distinct channel indices
over a fixed universe of C channels. Two subsets with the same member set
compare and hash equal, so they address the same fitness-cache entry no
matter in which order the members were supplied.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .errors import InvalidSubset


@dataclass(frozen=True)
class ChannelSubset:
    """Sorted, duplicate-free set of 0-based channel indices."""

    members: tuple[int, ...]
    universe_size: int

    def __init__(self, members: Iterable[int], universe_size: int):
        canon = tuple(sorted(int(m) for m in members))
        if universe_size < 1:
            raise InvalidSubset(f"universe_size must be >= 1, got {universe_size}")
        if len(set(canon)) != len(canon):
            raise InvalidSubset(f"duplicate channel indices in {canon}")
        for m in canon:
            if not 0 <= m < universe_size:
                raise InvalidSubset(
                    f"channel {m} outside universe [0, {universe_size})"
                )
        object.__setattr__(self, "members", canon)
        object.__setattr__(self, "universe_size", int(universe_size))

    @classmethod
    def from_mask(cls, mask: Iterable[int]) -> "ChannelSubset":
        bits = [int(b) for b in mask]
        return cls([i for i, b in enumerate(bits) if b], len(bits))

    def to_mask(self) -> np.ndarray:
        mask = np.zeros(self.universe_size, dtype=bool)
        mask[list(self.members)] = True
        return mask

    def with_channel(self, channel: int) -> "ChannelSubset":
        if channel in self.members:
            raise InvalidSubset(f"channel {channel} already in subset")
        return ChannelSubset(self.members + (channel,), self.universe_size)

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def sort_key(self) -> tuple[int, ...]:
        """Key for the package-wide deterministic tie-break order."""
        return self.members

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[int]:
        return iter(self.members)

    def __contains__(self, channel: int) -> bool:
        return channel in self.members

    def __str__(self) -> str:
        return "{" + ",".join(str(m) for m in self.members) + "}"
