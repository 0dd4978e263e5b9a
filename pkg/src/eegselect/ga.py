"""Fixed-cardinality genetic search over channel subsets.

Chromosomes are channel subsets encoded as bit masks over the universe.
The initial population is drawn by weighted sampling without replacement,
so every founder has exactly the target cardinality; crossover and
mutation are free to break it, and the fitness guard scores any
wrong-sized chromosome as exact 0 without consulting the evaluator.

Each generation: draw parent pairs uniformly with replacement, two-point
crossover, per-gene mutation, evaluate the children, then fill the next
population from the children only (no elitism -- the cache remembers the
best subsets even when the population loses them). Survivor selection is
rank-based by default: the population_size best children by fitness, so a
strong subset found once cannot be lost to sampling noise. With-replacement
tournaments are available as an alternative, but in a child pool that is
mostly wrong-cardinality (fitness 0) their selection pressure is too weak
to hold the population together.

All random draws for a generation happen before child evaluations are
dispatched, so running evaluations on a thread pool cannot change the
course of the search.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EmptyPool
from .evaluator import EvalContext, Evaluator, SubsetCache, evaluate, evaluate_many
from .rng import substream
from .subsets import ChannelSubset
from .weights import WeightVector


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def default_pairs(population_size: int) -> int:
    """Parent pairs per generation when not overridden: round(7 * n / 2)."""
    return _round_half_up(7.0 * population_size / 2.0)


@dataclass(frozen=True)
class GaConfig:
    k_target: int
    universe_size: int
    population_size: int = 12
    generations: int = 12
    pairs_per_generation: int | None = None  # default: round(7 * population_size / 2)
    crossover_prob: float = 0.85
    mutation_prob: float = 0.08
    survivor_selection: str = "rank"  # or "tournament"
    tournament_size: int = 2
    seed: int = 0

    def __post_init__(self) -> None:
        if self.survivor_selection not in ("rank", "tournament"):
            raise ConfigError(
                f"survivor_selection must be 'rank' or 'tournament', "
                f"got {self.survivor_selection!r}"
            )
        if not 1 <= self.k_target <= self.universe_size:
            raise ConfigError(
                f"k_target must be in [1, {self.universe_size}], got {self.k_target}"
            )
        if self.population_size < 2:
            raise ConfigError(f"population_size must be >= 2, got {self.population_size}")
        if self.generations < 1:
            raise ConfigError(f"generations must be >= 1, got {self.generations}")
        if self.pairs < 1:
            raise ConfigError(f"pairs_per_generation must be >= 1, got {self.pairs}")
        for name in ("crossover_prob", "mutation_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {p}")
        if self.tournament_size < 1:
            raise ConfigError(f"tournament_size must be >= 1, got {self.tournament_size}")

    @property
    def pairs(self) -> int:
        if self.pairs_per_generation is not None:
            return self.pairs_per_generation
        return default_pairs(self.population_size)


@dataclass(frozen=True)
class Population:
    individuals: tuple[ChannelSubset, ...]
    fitness: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.individuals) != len(self.fitness):
            raise ValueError(
                f"{len(self.individuals)} individuals vs {len(self.fitness)} fitness values"
            )

    def __len__(self) -> int:
        return len(self.individuals)

    @property
    def best_index(self) -> int:
        return min(
            range(len(self)),
            key=lambda i: (-self.fitness[i], self.individuals[i].sort_key),
        )


@dataclass(frozen=True)
class GenerationRecord:
    """Snapshot after one generation; index 0 is the initial population."""

    index: int
    best_fitness: float
    mean_fitness: float
    best_subset: tuple[int, ...]
    cache_best_fitness: float
    children_evaluated: int = 0
    children_best: float | None = None
    children_mean: float | None = None


@dataclass
class GaStats:
    records: list[GenerationRecord]
    first_seen: dict[ChannelSubset, int]

    def first_evaluated(self, subset: ChannelSubset) -> int | None:
        """Generation at which the subset first got a real evaluation
        (0 = founder population)."""
        return self.first_seen.get(subset)


def sample_weighted_subset(
    weights: np.ndarray, k: int, rng: np.random.Generator
) -> ChannelSubset:
    """Draw k distinct channels by sequential weighted sampling: after each
    draw the chosen channel's weight is zeroed and the rest renormalize."""
    living = weights.astype(float).copy()
    picked: list[int] = []
    for _ in range(k):
        cdf = np.cumsum(living)
        u = rng.random() * cdf[-1]
        idx = int(np.searchsorted(cdf, u, side="right"))
        idx = min(idx, len(living) - 1)
        picked.append(idx)
        living[idx] = 0.0
    return ChannelSubset(picked, len(weights))


def init_population(
    w: WeightVector, k: int, population_size: int, rng: np.random.Generator
) -> list[ChannelSubset]:
    return [sample_weighted_subset(w.as_array(), k, rng) for _ in range(population_size)]


def crossover_at(
    a: ChannelSubset, b: ChannelSubset, u: int, v: int
) -> tuple[ChannelSubset, ChannelSubset]:
    """Swap the gene segment [u, v) between two chromosomes."""
    mask_a, mask_b = a.to_mask(), b.to_mask()
    child_a, child_b = mask_a.copy(), mask_b.copy()
    child_a[u:v] = mask_b[u:v]
    child_b[u:v] = mask_a[u:v]
    return ChannelSubset.from_mask(child_a), ChannelSubset.from_mask(child_b)


def two_point_crossover(
    a: ChannelSubset,
    b: ChannelSubset,
    crossover_prob: float,
    rng: np.random.Generator,
) -> tuple[ChannelSubset, ChannelSubset]:
    """With probability crossover_prob, swap a random segment [u, v) where
    0 <= u < v <= C; otherwise return the parents unchanged. One uniform
    draw is consumed either way so call sites stay aligned."""
    roll = rng.random()
    if roll >= crossover_prob:
        return a, b
    size = a.universe_size
    u, v = sorted(rng.choice(size + 1, size=2, replace=False))
    return crossover_at(a, b, int(u), int(v))


def mutate(
    c: ChannelSubset, mutation_prob: float, rng: np.random.Generator
) -> ChannelSubset:
    """Flip each gene independently with probability mutation_prob."""
    flips = rng.random(c.universe_size) < mutation_prob
    if not flips.any():
        return c
    return ChannelSubset.from_mask(c.to_mask() ^ flips)


def guarded_fitness(
    c: ChannelSubset,
    k: int,
    ev: Evaluator,
    ctx: EvalContext,
    cache: SubsetCache,
) -> float:
    """Exact 0 for any chromosome without k channels -- the evaluator and
    cache are not touched -- otherwise the cached evaluation score."""
    if len(c) != k:
        return 0.0
    return evaluate(ev, c, ctx, cache).score


def _guarded_batch(
    children: list[ChannelSubset],
    k: int,
    ev: Evaluator,
    ctx: EvalContext,
    cache: SubsetCache,
    threads: int,
) -> list[float]:
    valid_idx = [i for i, c in enumerate(children) if len(c) == k]
    records = evaluate_many(ev, [children[i] for i in valid_idx], ctx, cache, threads)
    scores = [0.0] * len(children)
    for i, rec in zip(valid_idx, records):
        scores[i] = rec.score
    return scores


def rank_select(pool: Population, survivors: int) -> Population:
    """Keep the `survivors` highest-fitness candidates; equal fitness is
    ordered canonically so the cut is deterministic. Copies of one subset
    occupy multiple slots, which is what lets the final tally measure
    repetition."""
    if len(pool) == 0:
        raise EmptyPool("rank selection over an empty candidate pool")
    order = sorted(
        range(len(pool)),
        key=lambda i: (-pool.fitness[i], pool.individuals[i].sort_key, i),
    )[:survivors]
    return Population(
        tuple(pool.individuals[i] for i in order),
        tuple(pool.fitness[i] for i in order),
    )


def tournament_select(
    pool: Population,
    survivors: int,
    tournament_size: int,
    rng: np.random.Generator,
) -> Population:
    """Fill `survivors` slots by independent tournaments: draw
    tournament_size contestants uniformly with replacement, keep the one
    with the highest fitness (ties go to the subset that sorts first)."""
    if len(pool) == 0:
        raise EmptyPool("tournament over an empty candidate pool")
    draws = rng.integers(0, len(pool), size=(survivors, tournament_size))
    return _tournament_from_draws(pool, draws)


def _tournament_from_draws(pool: Population, draws: np.ndarray) -> Population:
    chosen: list[int] = []
    for row in draws:
        winner = min(
            (int(i) for i in row),
            key=lambda i: (-pool.fitness[i], pool.individuals[i].sort_key, i),
        )
        chosen.append(winner)
    return Population(
        tuple(pool.individuals[i] for i in chosen),
        tuple(pool.fitness[i] for i in chosen),
    )


def _record_first_seen(
    stats_first: dict[ChannelSubset, int], subsets: list[ChannelSubset], k: int, gen: int
) -> None:
    for s in subsets:
        if len(s) == k and s not in stats_first:
            stats_first[s] = gen


def run_dgaff(
    cfg: GaConfig,
    w: WeightVector,
    ev: Evaluator,
    ctx: EvalContext,
    cache: SubsetCache,
    threads: int = 1,
) -> tuple[Population, GaStats]:
    """Run the full genetic search; returns the last population and the
    per-generation statistics. Evaluations go through the shared cache, so
    a subset resurfacing in a later generation warm-starts instead of
    retraining."""
    if len(w) != cfg.universe_size:
        raise ConfigError(
            f"weight vector covers {len(w)} channels, universe has {cfg.universe_size}"
        )
    first_seen: dict[ChannelSubset, int] = {}
    records: list[GenerationRecord] = []

    init_rng = substream(cfg.seed, "ga", "init")
    founders = init_population(w, cfg.k_target, cfg.population_size, init_rng)
    _record_first_seen(first_seen, founders, cfg.k_target, 0)
    fitness = _guarded_batch(founders, cfg.k_target, ev, ctx, cache, threads)
    population = Population(tuple(founders), tuple(fitness))
    records.append(_snapshot(0, population, cache, cfg))

    for gen in range(1, cfg.generations + 1):
        pair_rng = substream(cfg.seed, "ga", "pairing", gen)
        cross_rng = substream(cfg.seed, "ga", "crossover", gen)
        mut_rng = substream(cfg.seed, "ga", "mutation", gen)
        tour_rng = substream(cfg.seed, "ga", "tournament", gen)

        parents = pair_rng.integers(0, len(population), size=(cfg.pairs, 2))
        children: list[ChannelSubset] = []
        for i, j in parents:
            c1, c2 = two_point_crossover(
                population.individuals[int(i)],
                population.individuals[int(j)],
                cfg.crossover_prob,
                cross_rng,
            )
            children.append(mutate(c1, cfg.mutation_prob, mut_rng))
            children.append(mutate(c2, cfg.mutation_prob, mut_rng))
        # commit every stochastic choice for this generation before any
        # evaluation is dispatched
        tournament_draws = None
        if cfg.survivor_selection == "tournament":
            tournament_draws = tour_rng.integers(
                0, len(children), size=(cfg.population_size, cfg.tournament_size)
            )

        _record_first_seen(first_seen, children, cfg.k_target, gen)
        child_scores = _guarded_batch(children, cfg.k_target, ev, ctx, cache, threads)
        child_pop = Population(tuple(children), tuple(child_scores))
        if tournament_draws is not None:
            population = _tournament_from_draws(child_pop, tournament_draws)
        else:
            population = rank_select(child_pop, cfg.population_size)
        population = _resync(population, cfg.k_target, cache)

        valid_scores = [s for c, s in zip(children, child_scores) if len(c) == cfg.k_target]
        records.append(
            _snapshot(
                gen,
                population,
                cache,
                cfg,
                children_evaluated=len(children),
                children_best=max(valid_scores) if valid_scores else 0.0,
                children_mean=(sum(valid_scores) / len(valid_scores)) if valid_scores else 0.0,
            )
        )

    return population, GaStats(records, first_seen)


def _resync(population: Population, k: int, cache: SubsetCache) -> Population:
    """Pin each survivor's fitness to the newest cache record, so duplicate
    survivors of a stochastic evaluator agree with its latest estimate."""
    scores = []
    for c in population.individuals:
        if len(c) != k:
            scores.append(0.0)
            continue
        rec = cache.latest(c)
        scores.append(rec.score if rec is not None else 0.0)
    return Population(population.individuals, tuple(scores))


def _snapshot(
    gen: int,
    population: Population,
    cache: SubsetCache,
    cfg: GaConfig,
    children_evaluated: int = 0,
    children_best: float | None = None,
    children_mean: float | None = None,
) -> GenerationRecord:
    best = population.best_index
    cache_best = cache.best(size=cfg.k_target)
    return GenerationRecord(
        index=gen,
        best_fitness=population.fitness[best],
        mean_fitness=float(np.mean(population.fitness)),
        best_subset=population.individuals[best].members,
        cache_best_fitness=cache_best[1].score if cache_best else 0.0,
        children_evaluated=children_evaluated,
        children_best=children_best,
        children_mean=children_mean,
    )
