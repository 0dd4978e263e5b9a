"""Selection-probability weights that bias the genetic stage toward the
channels the greedy search committed.

Construction: selected channels get raw weight m, every other channel gets
1, and the vector is normalized by its sum. The selected/unselected ratio
is therefore exactly m for any universe size.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ConfigError, EmptyUniverse
from .subsets import ChannelSubset


@dataclass(frozen=True)
class WeightVector:
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.weights:
            raise EmptyUniverse("weight vector over zero channels")
        if any(w <= 0 for w in self.weights):
            raise ValueError(f"weights must be positive: {self.weights}")
        total = sum(self.weights)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {total!r}, not 1")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    def __len__(self) -> int:
        return len(self.weights)


def uniform_weights(universe_size: int) -> WeightVector:
    if universe_size < 1:
        raise EmptyUniverse(f"universe_size must be >= 1, got {universe_size}")
    return WeightVector((1.0 / universe_size,) * universe_size)


def build_weights(selected: ChannelSubset, universe_size: int, bias: float) -> WeightVector:
    """Weight vector favoring `selected` channels by factor `bias` (>= 1).

    Computed in exact rationals before the float conversion, so the sum and
    the ratio hold to the last ulp even for large universes.
    """
    if universe_size < 1:
        raise EmptyUniverse(f"universe_size must be >= 1, got {universe_size}")
    if selected.universe_size != universe_size:
        raise ConfigError(
            f"selected subset spans {selected.universe_size} channels, expected {universe_size}"
        )
    if bias < 1:
        raise ConfigError(f"bias must be >= 1 (higher favors selected channels), got {bias}")

    m = Fraction(bias).limit_denominator(10**9)
    n_sel = len(selected)
    total = m * n_sel + (universe_size - n_sel)
    hot = m / total
    cold = Fraction(1) / total
    members = set(selected.members)
    return WeightVector(
        tuple(float(hot if i in members else cold) for i in range(universe_size))
    )
