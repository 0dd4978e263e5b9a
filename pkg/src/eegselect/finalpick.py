"""Final subset choice from the last genetic-stage population.

The last generation usually contains repeated subsets; repetition is
itself evidence, since a subset that survived many tournaments keeps
earning its place. Each unique subset gets a combined score

    gamma * frequency + (1 - gamma) * fitness

where frequency is its share of the population, and the argmax wins.
gamma = 0 trusts fitness alone, gamma = 1 repetition alone.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError, EmptyTally
from .ga import Population
from .subsets import ChannelSubset


@dataclass(frozen=True)
class TallyEntry:
    subset: ChannelSubset
    count: int
    frequency: float  # count / population size
    fitness: float

    def combined_score(self, gamma: float) -> float:
        return gamma * self.frequency + (1.0 - gamma) * self.fitness


@dataclass(frozen=True)
class SelectionTally:
    entries: tuple[TallyEntry, ...]
    population_size: int

    def __post_init__(self) -> None:
        if sum(e.count for e in self.entries) != self.population_size:
            raise ValueError(
                f"tally counts sum to {sum(e.count for e in self.entries)}, "
                f"population has {self.population_size}"
            )
        if len({e.subset for e in self.entries}) != len(self.entries):
            raise ValueError("tally entries must be distinct subsets")
        for e in self.entries:
            if not 0.0 <= e.frequency <= 1.0 or not 0.0 <= e.fitness <= 1.0:
                raise ValueError(f"entry out of range: {e}")

    def __len__(self) -> int:
        return len(self.entries)


def check_gamma(gamma: float) -> float:
    if not 0.0 <= gamma <= 1.0:
        raise ConfigError(f"gamma must be in [0, 1], got {gamma}")
    return float(gamma)


def tally_unique(population: Population) -> SelectionTally:
    """Collapse a population to one entry per distinct subset.

    The fitness recorded for a subset is the one its last copy carries; by
    the time a population reaches this point all copies have been resynced
    to the cache's newest record, so they agree.
    """
    counts: dict[ChannelSubset, int] = {}
    fitness: dict[ChannelSubset, float] = {}
    for subset, score in zip(population.individuals, population.fitness):
        counts[subset] = counts.get(subset, 0) + 1
        fitness[subset] = score
    n = len(population)
    entries = tuple(
        TallyEntry(s, c, c / n, fitness[s])
        for s, c in sorted(counts.items(), key=lambda kv: kv[0].sort_key)
    )
    return SelectionTally(entries, n)


def select_final(
    tally: SelectionTally, gamma: float, required_size: int | None = None
) -> TallyEntry:
    """Argmax of the combined score; ties break toward higher fitness, then
    toward the subset that sorts first.

    required_size restricts the argmax to subsets of that cardinality;
    wrong-sized survivors carry zero fitness but can still pile up
    frequency, and they must never win.
    """
    gamma = check_gamma(gamma)
    entries = tally.entries
    if required_size is not None:
        entries = tuple(e for e in entries if len(e.subset) == required_size)
    if not entries:
        raise EmptyTally(
            "no subsets to select from"
            + (f" (none of size {required_size})" if required_size is not None else "")
        )
    return min(
        entries,
        key=lambda e: (-e.combined_score(gamma), -e.fitness, e.subset.sort_key),
    )
