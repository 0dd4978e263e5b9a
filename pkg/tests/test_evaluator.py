"""Evaluation contract: cache semantics, warm starts, built-in evaluators."""

from __future__ import annotations

import numpy as np
import pytest

from eegselect.errors import DegenerateFeatures, InvalidSubset, ScoreOutOfRange
from eegselect.evaluator import (
    EvalContext,
    Evaluator,
    FitnessRecord,
    LinearProbeEvaluator,
    ModularEvaluator,
    PlantedEvaluator,
    SubsetCache,
    evaluate,
    evaluate_many,
)
from eegselect.preprocess import split_train_valid
from eegselect.subsets import ChannelSubset
from helpers import CountingEvaluator, make_dataset, separable_dataset


def ctx_for(n_channels: int, num_classes: int = 2) -> EvalContext:
    d = make_dataset(n_channels=n_channels, num_classes=num_classes)
    return EvalContext(d, d, num_classes)


# --- planted (synthetic ground truth) -----------------------------------

def test_planted_overlap_values():
    ctx = ctx_for(8)
    planted = ChannelSubset([0, 1, 2, 3], 8)
    ev = PlantedEvaluator(planted)
    assert ev.evaluate(planted, ctx).score == 1.0
    assert ev.evaluate(ChannelSubset([4, 5, 6, 7], 8), ctx).score == 0.0
    # intersection 2, union 6
    third = ev.evaluate(ChannelSubset([2, 3, 4, 5], 8), ctx).score
    assert third == pytest.approx(1 / 3, abs=1e-15)


def test_planted_noise_reproducible_and_clipped():
    ctx = ctx_for(8)
    planted = ChannelSubset([0, 1], 8)
    ev = PlantedEvaluator(planted, noise_sigma=0.3, seed=11)
    s = ChannelSubset([0, 2], 8)
    a = ev.evaluate(s, ctx).score
    b = ev.evaluate(s, ctx).score  # same occurrence -> same noise draw
    assert a == b
    assert 0.0 <= a <= 1.0
    assert not ev.deterministic
    assert PlantedEvaluator(planted).deterministic


def test_planted_warm_scores_vary_less_than_cold():
    # re-measurement after a warm start runs at a fraction of the cold noise
    ctx = ctx_for(8)
    planted = ChannelSubset([0, 1, 2, 3], 8)
    probe = ChannelSubset([0, 1, 2, 4], 8)  # overlap 3/5, away from the clip walls
    cold, warm = [], []
    for seed in range(120):
        ev = PlantedEvaluator(planted, noise_sigma=0.1, seed=seed)
        first = ev.evaluate(probe, ctx)
        second = ev.evaluate(probe, ctx, warm_key=first.state_key)
        cold.append(first.score)
        warm.append(second.score)
    assert np.std(warm) < np.std(cold)
    assert np.std(warm) == pytest.approx(0.025, rel=0.5)


def test_planted_occurrence_advances_with_warm_key():
    ctx = ctx_for(4)
    ev = PlantedEvaluator(ChannelSubset([0], 4), noise_sigma=0.05, seed=1)
    s = ChannelSubset([1], 4)
    r1 = ev.evaluate(s, ctx)
    r2 = ev.evaluate(s, ctx, warm_key=r1.state_key)
    r3 = ev.evaluate(s, ctx, warm_key=r2.state_key)
    assert [r1.state_key, r2.state_key, r3.state_key] == ["1", "2", "3"]
    assert r1.fresh and not r2.fresh and not r3.fresh


# --- modular (greedy reference) -----------------------------------------

def test_modular_is_sum_over_total():
    ctx = ctx_for(4)
    ev = ModularEvaluator([1.0, 2.0, 3.0, 4.0])
    assert ev.evaluate(ChannelSubset([1, 3], 4), ctx).score == pytest.approx(0.6)
    assert ev.evaluate(ChannelSubset([], 4), ctx).score == 0.0
    assert ev.evaluate(ChannelSubset([0, 1, 2, 3], 4), ctx).score == 1.0


def test_modular_rejects_bad_values():
    with pytest.raises(ValueError):
        ModularEvaluator([1.0, -0.5])
    with pytest.raises(ValueError):
        ModularEvaluator([0.0, 0.0])
    with pytest.raises(ValueError):
        ModularEvaluator([])


# --- linear probe -------------------------------------------------------

def test_probe_prefers_the_informative_channel():
    d = separable_dataset(n_trials=48, n_channels=5, good=(3,), seed=2)
    train, valid = split_train_valid(d, 0.25, seed=0)
    ctx = EvalContext(train, valid, 2)
    ev = LinearProbeEvaluator()
    informative = ev.evaluate(ChannelSubset([3], 5), ctx).score
    for j in (0, 1, 2, 4):
        assert informative > ev.evaluate(ChannelSubset([j], 5), ctx).score


def test_probe_is_chance_on_shuffled_labels():
    base = separable_dataset(n_trials=64, n_channels=4, good=(1,), seed=3)
    ev = LinearProbeEvaluator()
    scores = []
    for seed in range(5):
        rng = np.random.default_rng(100 + seed)
        shuffled = rng.permutation(np.asarray(base.labels))
        from eegselect.tensorio import Dataset

        d = Dataset.create(base.trials, shuffled, base.artifact_flags, 250.0)
        train, valid = split_train_valid(d, 0.25, seed=seed)
        ctx = EvalContext(train, valid, 2)
        scores.append(ev.evaluate(ChannelSubset([1], 4), ctx).score)
    assert abs(float(np.mean(scores)) - 0.5) <= 0.2


def test_probe_deterministic():
    d = separable_dataset(seed=4)
    train, valid = split_train_valid(d, 0.25, seed=0)
    ctx = EvalContext(train, valid, 2)
    ev = LinearProbeEvaluator()
    s = ChannelSubset([1, 3], 6)
    assert ev.evaluate(s, ctx).score == ev.evaluate(s, ctx).score
    assert ev.deterministic


def test_probe_degenerate_constant_channel():
    d = make_dataset(n_trials=8, n_channels=3)
    trials = np.array(d.trials)
    trials[:, 2, :] = 7.0  # flat line
    from eegselect.tensorio import Dataset

    flat = Dataset.create(trials, d.labels, d.artifact_flags, 250.0)
    ctx = EvalContext(flat, flat, 2)
    with pytest.raises(DegenerateFeatures, match="channel 2 is constant"):
        LinearProbeEvaluator().evaluate(ChannelSubset([0, 2], 3), ctx)


def test_probe_degenerate_single_trial_class():
    d = make_dataset(n_trials=3, num_classes=3)  # one trial per class
    ctx = EvalContext(d, d, 3)
    with pytest.raises(DegenerateFeatures, match="need >= 2"):
        LinearProbeEvaluator().evaluate(ChannelSubset([0], 4), ctx)


def test_probe_rejects_bad_lambda():
    with pytest.raises(ValueError):
        LinearProbeEvaluator(ridge_lambda=0.0)


# --- cache --------------------------------------------------------------

def test_cache_counters_and_history():
    cache = SubsetCache()
    s = ChannelSubset([0, 1], 4)
    cache.add(s, FitnessRecord(0.5, "a", fresh=True))
    cache.add(s, FitnessRecord(0.6, "b", fresh=False))
    assert cache.latest(s).state_key == "b"
    assert [r.state_key for r in cache.history(s)] == ["a", "b"]
    assert cache.fresh_evaluations == 1
    assert cache.cached_requests == 1
    assert cache.total_requests == 2
    assert cache.distinct_subsets == 1
    cache.count_reuse()
    assert cache.cached_requests == 2


def test_cache_is_content_addressed():
    cache = SubsetCache()
    cache.add(ChannelSubset([3, 1], 5), FitnessRecord(0.4, "x", fresh=True))
    assert cache.latest(ChannelSubset([1, 3], 5)).score == 0.4


def test_cache_best_breaks_ties_canonically():
    cache = SubsetCache()
    for members in ([2, 4], [0, 5], [1, 3]):
        cache.add(ChannelSubset(members, 6), FitnessRecord(0.9, "", fresh=True))
    cache.add(ChannelSubset([0], 6), FitnessRecord(0.95, "", fresh=True))
    best_pair = cache.best(size=2)
    assert best_pair[0].members == (0, 5)
    assert cache.best()[0].members == (0,)
    assert cache.best(size=3) is None


# --- evaluate through the cache -----------------------------------------

def test_deterministic_repeat_skips_the_evaluator():
    ctx = ctx_for(4)
    spy = CountingEvaluator(ModularEvaluator([1, 2, 3, 4]))
    cache = SubsetCache()
    s = ChannelSubset([1, 2], 4)
    r1 = evaluate(spy, s, ctx, cache)
    r2 = evaluate(spy, s, ctx, cache)
    assert r1.fresh and not r2.fresh
    assert r1.score == r2.score
    assert len(spy.calls) == 1
    assert cache.fresh_evaluations == 1 and cache.cached_requests == 1


def test_stochastic_repeat_goes_warm():
    ctx = ctx_for(6)
    planted = ChannelSubset([0, 1, 2], 6)
    spy = CountingEvaluator(PlantedEvaluator(planted, noise_sigma=0.05, seed=3))
    cache = SubsetCache()
    s = ChannelSubset([0, 1, 3], 6)
    r1 = evaluate(spy, s, ctx, cache)
    r2 = evaluate(spy, s, ctx, cache)
    assert [wk for _, wk in spy.calls] == [None, r1.state_key]
    assert not r2.fresh
    assert len(cache.history(s)) == 2


def test_evaluate_rejects_universe_mismatch():
    ctx = ctx_for(4)
    with pytest.raises(InvalidSubset, match="data has 4"):
        evaluate(ModularEvaluator([1] * 5), ChannelSubset([0], 5), ctx, SubsetCache())


class _Broken(Evaluator):
    name = "broken"
    deterministic = True

    def __init__(self, score):
        self._score = score

    def evaluate(self, subset, ctx, warm_key=None):
        return FitnessRecord(self._score, "", fresh=True)


@pytest.mark.parametrize("score", [1.5, -0.1, float("nan"), float("inf")])
def test_out_of_range_scores_rejected(score):
    ctx = ctx_for(4)
    with pytest.raises(ScoreOutOfRange):
        evaluate(_Broken(score), ChannelSubset([0], 4), ctx, SubsetCache())


# --- batch evaluation ---------------------------------------------------

def test_evaluate_many_deduplicates_and_orders():
    ctx = ctx_for(4)
    spy = CountingEvaluator(ModularEvaluator([1, 2, 3, 4]))
    cache = SubsetCache()
    a = ChannelSubset([0], 4)
    b = ChannelSubset([1], 4)
    c = ChannelSubset([2], 4)
    records = evaluate_many(spy, [a, b, a, c, b], ctx, cache)
    assert len(spy.calls) == 3  # one per distinct subset
    assert [r.fresh for r in records] == [True, True, False, True, False]
    assert [r.score for r in records] == [0.1, 0.2, 0.1, 0.3, 0.2]
    assert cache.fresh_evaluations == 3
    assert cache.cached_requests == 2


@pytest.mark.parametrize("sigma", [0.0, 0.05])
def test_evaluate_many_thread_count_invariance(sigma):
    ctx = ctx_for(8)
    planted = ChannelSubset([0, 1, 2], 8)
    subsets = [
        ChannelSubset(m, 8)
        for m in ([0, 1, 2], [1, 2, 3], [0, 1, 2], [4, 5, 6], [1, 2, 3], [0, 2, 7])
    ]
    outcomes = []
    for threads in (1, 4):
        ev = PlantedEvaluator(planted, noise_sigma=sigma, seed=9)
        cache = SubsetCache()
        recs = evaluate_many(ev, subsets, ctx, cache, threads=threads)
        outcomes.append(
            (
                [(r.score, r.state_key, r.fresh) for r in recs],
                cache.fresh_evaluations,
                cache.cached_requests,
            )
        )
    assert outcomes[0] == outcomes[1]


def test_fresh_count_equals_distinct_subsets():
    ctx = ctx_for(8)
    ev = PlantedEvaluator(ChannelSubset([0, 1, 2], 8), noise_sigma=0.05, seed=2)
    cache = SubsetCache()
    rng = np.random.default_rng(0)
    for _ in range(60):
        members = rng.choice(8, size=3, replace=False)
        evaluate(ev, ChannelSubset(members, 8), ctx, cache)
    assert cache.fresh_evaluations == cache.distinct_subsets
