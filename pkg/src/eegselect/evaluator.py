"""Fitness evaluation contract, the subset-history cache, and built-in
evaluators.

An Evaluator scores a channel subset on held-out data and hands back an
opaque state key. When the same subset comes up again, the cache supplies
that key so the evaluator can continue from saved state (a warm start)
instead of training from scratch. Deterministic evaluators skip even the
warm call: the cached score is returned as-is.

The batch helper evaluate_many runs only the cold (never-seen) subsets in
parallel; repeats are served sequentially in input order, so results and
cache counters are identical for any worker count.
"""

from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import DegenerateFeatures, InvalidSubset, ScoreOutOfRange
from .rng import substream
from .subsets import ChannelSubset
from .tensorio import Dataset


@dataclass(frozen=True)
class FitnessRecord:
    """One scored evaluation: fitness in [0, 1], the evaluator's state key,
    and whether this was a from-scratch training."""

    score: float
    state_key: str
    fresh: bool


@dataclass(frozen=True)
class EvalContext:
    """Everything an evaluator may need: the split datasets in memory plus,
    for out-of-process evaluators, where those splits live on disk."""

    train: Dataset
    valid: Dataset
    num_classes: int
    train_path: str | None = None
    valid_path: str | None = None


class Evaluator:
    """Interface all fitness evaluators implement."""

    name: str = "evaluator"
    #: True when equal inputs always produce equal scores. Lets the cache
    #: answer repeats without calling the evaluator at all.
    deterministic: bool = False

    def evaluate(
        self, subset: ChannelSubset, ctx: EvalContext, warm_key: str | None = None
    ) -> FitnessRecord:
        raise NotImplementedError

    def close(self) -> None:
        """Release external resources; default is a no-op."""


class SubsetCache:
    """Thread-safe history of every evaluation, keyed by subset.

    Keeps the full record list per subset (newest last) plus the counters
    the run report exposes: fresh trainings, cache-served requests, and
    distinct subsets.
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._history: dict[ChannelSubset, list[FitnessRecord]] = {}
        self._fresh = 0
        self._cached = 0

    def latest(self, subset: ChannelSubset) -> FitnessRecord | None:
        with self._lock:
            recs = self._history.get(subset)
            return recs[-1] if recs else None

    def history(self, subset: ChannelSubset) -> tuple[FitnessRecord, ...]:
        with self._lock:
            return tuple(self._history.get(subset, ()))

    def add(self, subset: ChannelSubset, record: FitnessRecord) -> None:
        with self._lock:
            self._history.setdefault(subset, []).append(record)
            if record.fresh:
                self._fresh += 1
            else:
                self._cached += 1

    def count_reuse(self) -> None:
        """Tally a request answered straight from the cache."""
        with self._lock:
            self._cached += 1

    @property
    def fresh_evaluations(self) -> int:
        with self._lock:
            return self._fresh

    @property
    def cached_requests(self) -> int:
        with self._lock:
            return self._cached

    @property
    def total_requests(self) -> int:
        with self._lock:
            return self._fresh + self._cached

    @property
    def distinct_subsets(self) -> int:
        with self._lock:
            return len(self._history)

    def subsets(self) -> list[ChannelSubset]:
        with self._lock:
            return list(self._history)

    def best(self, size: int | None = None) -> tuple[ChannelSubset, FitnessRecord] | None:
        """Highest-scoring subset by latest record; ties go to the subset
        that sorts first. Optionally restricted to subsets of a given size."""
        with self._lock:
            items = [
                (s, recs[-1])
                for s, recs in self._history.items()
                if recs and (size is None or len(s) == size)
            ]
        if not items:
            return None
        return min(items, key=lambda it: (-it[1].score, it[0].sort_key))


def _checked(record: FitnessRecord, ev: Evaluator, subset: ChannelSubset) -> FitnessRecord:
    s = record.score
    if not np.isfinite(s) or not 0.0 <= s <= 1.0:
        raise ScoreOutOfRange(
            f"{ev.name} returned fitness {s!r} for {subset}; must be finite in [0, 1]"
        )
    return record


def evaluate(
    ev: Evaluator, subset: ChannelSubset, ctx: EvalContext, cache: SubsetCache
) -> FitnessRecord:
    """Score one subset through the cache.

    Cache miss: fresh evaluation, recorded. Repeat of a deterministic
    evaluator: cached score returned, evaluator not called. Repeat of a
    stochastic one: warm evaluation from the stored state key, recorded as
    a new history entry.
    """
    if subset.universe_size != ctx.train.n_channels:
        raise InvalidSubset(
            f"subset over {subset.universe_size} channels but data has "
            f"{ctx.train.n_channels}"
        )
    prior = cache.latest(subset)
    if prior is None:
        rec = _checked(replace(ev.evaluate(subset, ctx, None), fresh=True), ev, subset)
        cache.add(subset, rec)
        return rec
    if ev.deterministic:
        cache.count_reuse()
        return replace(prior, fresh=False)
    rec = ev.evaluate(subset, ctx, warm_key=prior.state_key)
    rec = _checked(replace(rec, fresh=False), ev, subset)
    cache.add(subset, rec)
    return rec


def evaluate_many(
    ev: Evaluator,
    subsets: Sequence[ChannelSubset],
    ctx: EvalContext,
    cache: SubsetCache,
    threads: int = 1,
) -> list[FitnessRecord]:
    """Score a batch, one record per input position.

    Never-seen subsets are deduplicated and may run on a thread pool; all
    repeats go through the sequential cache path afterwards, in input
    order. Counters and scores are therefore independent of thread count.
    """
    cold: list[ChannelSubset] = []
    cold_seen: set[ChannelSubset] = set()
    for s in subsets:
        if s.universe_size != ctx.train.n_channels:
            raise InvalidSubset(
                f"subset over {s.universe_size} channels but data has "
                f"{ctx.train.n_channels}"
            )
        if s not in cold_seen and cache.latest(s) is None:
            cold_seen.add(s)
            cold.append(s)

    if threads > 1 and len(cold) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            fresh = list(pool.map(lambda s: ev.evaluate(s, ctx, None), cold))
    else:
        fresh = [ev.evaluate(s, ctx, None) for s in cold]
    cold_record: dict[ChannelSubset, FitnessRecord] = {}
    for s, rec in zip(cold, fresh):
        rec = _checked(replace(rec, fresh=True), ev, s)
        cache.add(s, rec)
        cold_record[s] = rec

    out: list[FitnessRecord] = []
    for s in subsets:
        if s in cold_record:
            out.append(cold_record.pop(s))
        else:
            out.append(evaluate(ev, s, ctx, cache))
    return out


def _jaccard(a: ChannelSubset, b: ChannelSubset) -> float:
    sa, sb = set(a.members), set(b.members)
    union = sa | sb
    if not union:
        return 1.0
    return len(sa & sb) / len(union)


class PlantedEvaluator(Evaluator):
    """Synthetic ground truth: fitness is the overlap (intersection over
    union) between the candidate and a planted subset, optionally plus
    Gaussian noise.

    Noise is keyed by (seed, subset, occurrence number) so a given
    evaluation is reproducible no matter how calls interleave across
    threads. Warm evaluations re-measure with the noise scale shrunk by
    warm_noise_factor, mimicking a classifier whose estimate settles as
    training continues.
    """

    name = "planted"

    def __init__(
        self,
        planted: ChannelSubset,
        noise_sigma: float = 0.0,
        seed: int = 0,
        warm_noise_factor: float = 0.25,
    ) -> None:
        self.planted = planted
        self.noise_sigma = float(noise_sigma)
        self.seed = int(seed)
        self.warm_noise_factor = float(warm_noise_factor)

    @property
    def deterministic(self) -> bool:  # type: ignore[override]
        return self.noise_sigma == 0.0

    def evaluate(
        self, subset: ChannelSubset, ctx: EvalContext, warm_key: str | None = None
    ) -> FitnessRecord:
        occurrence = 1 if warm_key is None else int(warm_key) + 1
        score = _jaccard(subset, self.planted)
        if self.noise_sigma > 0.0:
            sigma = self.noise_sigma * (1.0 if warm_key is None else self.warm_noise_factor)
            rng = substream(self.seed, "planted-noise", str(subset), occurrence)
            score = float(np.clip(score + rng.normal(0.0, sigma), 0.0, 1.0))
        return FitnessRecord(score, str(occurrence), fresh=warm_key is None)


class ModularEvaluator(Evaluator):
    """Additive fitness: each channel has a fixed value and a subset scores
    the sum of its values over the total. Its optima are exactly the
    channels sorted by value, which makes it a clean reference for the
    greedy search."""

    name = "modular"
    deterministic = True

    def __init__(self, values: Sequence[float]) -> None:
        vals = np.asarray(values, dtype=float)
        if vals.ndim != 1 or len(vals) == 0 or np.any(vals < 0) or vals.sum() <= 0:
            raise ValueError("values must be non-negative with a positive sum")
        self.values = vals

    def evaluate(
        self, subset: ChannelSubset, ctx: EvalContext, warm_key: str | None = None
    ) -> FitnessRecord:
        score = float(self.values[list(subset.members)].sum() / self.values.sum())
        return FitnessRecord(score, "sum", fresh=warm_key is None)


class LinearProbeEvaluator(Evaluator):
    """Cheap deterministic probe: ridge regression on log band-power
    features (per-trial, per-channel signal variance), scored as accuracy
    on the validation split.

    No warm start to speak of -- the closed-form fit is the whole training
    run -- but it exercises the full contract and is fast enough to sit
    inside the search loop on real recordings.
    """

    name = "linear"
    deterministic = True

    def __init__(self, ridge_lambda: float = 1e-3) -> None:
        if ridge_lambda <= 0:
            raise ValueError(f"ridge_lambda must be positive, got {ridge_lambda}")
        self.ridge_lambda = float(ridge_lambda)

    def _features(self, data: Dataset, subset: ChannelSubset) -> np.ndarray:
        sel = data.trials[:, list(subset.members), :].astype(np.float64)
        var = sel.var(axis=2)
        if np.any(var <= 0.0):
            t, c = np.argwhere(var <= 0.0)[0]
            raise DegenerateFeatures(
                f"channel {subset.members[c]} is constant over trial {t}; "
                "log-variance features are undefined"
            )
        return np.log(var)

    def evaluate(
        self, subset: ChannelSubset, ctx: EvalContext, warm_key: str | None = None
    ) -> FitnessRecord:
        counts = np.bincount(ctx.train.labels, minlength=ctx.num_classes)
        if np.any(counts < 2):
            cls = int(np.argmin(counts))
            raise DegenerateFeatures(
                f"class {cls} has {int(counts[cls])} training trials; need >= 2"
            )
        x_train = self._features(ctx.train, subset)
        x_valid = self._features(ctx.valid, subset)

        mean = x_train.mean(axis=0)
        std = x_train.std(axis=0)
        std[std == 0.0] = 1.0
        x_train = (x_train - mean) / std
        x_valid = (x_valid - mean) / std

        ones = np.ones((len(x_train), 1))
        xb = np.hstack([x_train, ones])
        onehot = np.eye(ctx.num_classes)[ctx.train.labels]
        gram = xb.T @ xb + self.ridge_lambda * np.eye(xb.shape[1])
        weights = np.linalg.solve(gram, xb.T @ onehot)

        scores = np.hstack([x_valid, np.ones((len(x_valid), 1))]) @ weights
        predicted = scores.argmax(axis=1)
        accuracy = float((predicted == ctx.valid.labels).mean())
        return FitnessRecord(accuracy, "fit", fresh=warm_key is None)
