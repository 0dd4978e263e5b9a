"""Greedy forward channel search.

Grows a subset one channel per level: every remaining channel is tried as
an extension, all extensions are scored, and the best one is committed.
The default run stops after k_target - 1 levels so the genetic stage has
one channel of slack to explore; full-sweep mode keeps aggregating until
every channel is in and returns the best committed subset of any size.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError
from .evaluator import EvalContext, Evaluator, SubsetCache, evaluate_many
from .subsets import ChannelSubset


@dataclass(frozen=True)
class HicsConfig:
    k_target: int
    universe_size: int
    full_sweep: bool = False

    def __post_init__(self) -> None:
        if not 1 <= self.k_target <= self.universe_size:
            raise ConfigError(
                f"k_target must be in [1, {self.universe_size}], got {self.k_target}"
            )


@dataclass(frozen=True)
class HicsLevel:
    """One committed growth step: every candidate tried and the winner."""

    level: int  # 1-based; subset size after the commit
    candidates: tuple[tuple[int, float], ...]  # (channel, fitness) in channel order
    chosen: int
    chosen_fitness: float


@dataclass(frozen=True)
class HicsTrace:
    levels: tuple[HicsLevel, ...]

    @property
    def total_evaluations(self) -> int:
        return sum(len(lvl.candidates) for lvl in self.levels)


def run_hics(
    cfg: HicsConfig,
    ev: Evaluator,
    ctx: EvalContext,
    cache: SubsetCache,
    threads: int = 1,
    n_levels: int | None = None,
) -> tuple[ChannelSubset, HicsTrace]:
    """Run the greedy search; returns (selected subset, per-level trace).

    The default depth is k_target - 1 levels (one short of the pipeline
    cardinality, leaving the genetic stage a channel of freedom); pass
    n_levels to stop elsewhere, e.g. k_target for a greedy-only run.
    Full-sweep mode ignores both and aggregates to the whole universe.

    Within a level all candidate evaluations are independent and may run on
    threads; the argmax is reduced in ascending channel order, so equal
    fitness goes to the lowest channel index and the outcome does not
    depend on scheduling.
    """
    if cfg.full_sweep:
        n_levels = cfg.universe_size
    elif n_levels is None:
        n_levels = cfg.k_target - 1
    elif not 0 <= n_levels <= cfg.universe_size:
        raise ConfigError(
            f"n_levels must be in [0, {cfg.universe_size}], got {n_levels}"
        )
    current = ChannelSubset((), cfg.universe_size)
    pool = list(range(cfg.universe_size))  # kept ascending
    levels: list[HicsLevel] = []
    committed: list[tuple[ChannelSubset, float]] = []

    for level in range(1, n_levels + 1):
        trials = [current.with_channel(ch) for ch in pool]
        records = evaluate_many(ev, trials, ctx, cache, threads=threads)
        best_i = 0
        for i in range(1, len(pool)):
            if records[i].score > records[best_i].score:
                best_i = i
        candidates = tuple((ch, rec.score) for ch, rec in zip(pool, records))
        chosen = pool.pop(best_i)
        current = trials[best_i]
        levels.append(
            HicsLevel(
                level=level,
                candidates=candidates,
                chosen=chosen,
                chosen_fitness=records[best_i].score,
            )
        )
        committed.append((current, records[best_i].score))

    trace = HicsTrace(tuple(levels))
    if not committed:
        return current, trace
    if cfg.full_sweep:
        # best committed subset across sizes; first (smallest) level wins ties
        best = max(range(len(committed)), key=lambda i: (committed[i][1], -i))
        return committed[best][0], trace
    return current, trace
