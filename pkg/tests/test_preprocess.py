"""Preprocessing stages: rejection, windowing, normalization, split."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eegselect.errors import (
    AllTrialsRejected,
    ConfigError,
    TooFewTrials,
    WindowOutOfBounds,
)
from eegselect.preprocess import (
    WindowSpec,
    normalize_amplitude,
    reject_artifacts,
    split_train_valid,
    window_trials,
)
from eegselect.tensorio import Dataset
from helpers import make_dataset


# --- artifact rejection -------------------------------------------------

def test_reject_keeps_clean_trials_in_order():
    d = make_dataset(n_trials=3, flags=[0, 1, 0])
    out = reject_artifacts(d)
    assert out.n_trials == 2
    np.testing.assert_array_equal(out.trials[0], d.trials[0])
    np.testing.assert_array_equal(out.trials[1], d.trials[2])
    assert list(out.labels) == [int(d.labels[0]), int(d.labels[2])]
    assert not out.artifact_flags.any()


def test_reject_all_clean_is_identity():
    d = make_dataset(n_trials=5)
    out = reject_artifacts(d)
    np.testing.assert_array_equal(out.trials, d.trials)
    np.testing.assert_array_equal(out.labels, d.labels)


def test_reject_everything_raises():
    d = make_dataset(n_trials=3, flags=[1, 1, 1])
    with pytest.raises(AllTrialsRejected, match="all 3 trials"):
        reject_artifacts(d)


# --- windowing ----------------------------------------------------------

def test_default_window_at_250hz():
    # 2.0 s cue, 0.5 s lead-in, 6.0 s end -> [1.5 s, 6.0 s) = 1125 samples
    # starting at sample 375
    d = make_dataset(n_trials=2, n_samples=1750, sample_rate_hz=250.0)
    out = window_trials(d, WindowSpec())
    assert out.n_samples == 1125
    np.testing.assert_array_equal(out.trials, d.trials[:, :, 375:1500])


def test_window_spec_validation():
    with pytest.raises(ConfigError, match="before trial start"):
        WindowSpec(cue_onset_s=0.0, pre_cue_s=0.5)
    with pytest.raises(ConfigError, match="not after"):
        WindowSpec(cue_onset_s=2.0, pre_cue_s=0.0, task_end_s=2.0)
    with pytest.raises(ConfigError, match="pre_cue_s"):
        WindowSpec(pre_cue_s=-0.1)


def test_window_full_trial_is_identity():
    d = make_dataset(n_samples=100, sample_rate_hz=50.0)  # 2 s trials
    out = window_trials(d, WindowSpec(cue_onset_s=0.0, pre_cue_s=0.0, task_end_s=2.0))
    np.testing.assert_array_equal(out.trials, d.trials)


def test_window_past_end_raises():
    d = make_dataset(n_samples=100, sample_rate_hz=50.0)
    with pytest.raises(WindowOutOfBounds, match="trials have 100 samples"):
        window_trials(d, WindowSpec(cue_onset_s=0.0, pre_cue_s=0.0, task_end_s=2.5))


def test_window_rounding_is_half_up():
    # 0.5-sample boundaries: start 1.25 s * 10 Hz = 12.5 -> 13,
    # length (2.0 - 1.25) * 10 = 7.5 -> 8
    d = make_dataset(n_samples=21, sample_rate_hz=10.0)
    out = window_trials(
        d, WindowSpec(cue_onset_s=1.25, pre_cue_s=0.0, task_end_s=2.0)
    )
    assert out.n_samples == 8
    np.testing.assert_array_equal(out.trials, d.trials[:, :, 13:21])


# --- normalization ------------------------------------------------------

def test_normalize_linear_and_clamped():
    trials = np.array([[[100.0, -250.0, 50.0, 0.0]]], dtype=np.float32)
    d = Dataset.create(trials, [0], [False], 250.0)
    out = normalize_amplitude(d, 100.0)
    np.testing.assert_allclose(out.trials[0, 0], [1.0, -1.0, 0.5, 0.0])


def test_normalize_idempotent_within_range():
    d = make_dataset(amplitude=30.0)  # well inside +-100
    once = normalize_amplitude(d, 100.0)
    assert float(np.abs(once.trials).max()) <= 1.0
    # output is inside [-1, 1]; normalizing with limit 1 changes nothing
    twice = normalize_amplitude(once, 1.0)
    np.testing.assert_array_equal(twice.trials, once.trials)


def test_normalize_rejects_bad_limit():
    with pytest.raises(ConfigError, match="positive"):
        normalize_amplitude(make_dataset(), 0.0)


# --- stratified split ---------------------------------------------------

def test_split_sizes():
    d = make_dataset(n_trials=10)
    train, valid = split_train_valid(d, 0.2, seed=0)
    assert (train.n_trials, valid.n_trials) == (8, 2)


def test_split_deterministic():
    d = make_dataset(n_trials=20)
    a = split_train_valid(d, 0.25, seed=5)
    b = split_train_valid(d, 0.25, seed=5)
    np.testing.assert_array_equal(a[1].trials, b[1].trials)
    c = split_train_valid(d, 0.25, seed=6)
    assert not np.array_equal(a[1].trials, c[1].trials)


def test_split_stratification_exact():
    # 4 classes x 25 trials, 20% -> 5 of each class in validation
    d = make_dataset(n_trials=100, num_classes=4)
    _, valid = split_train_valid(d, 0.2, seed=1)
    counts = np.bincount(valid.labels, minlength=4)
    np.testing.assert_array_equal(counts, [5, 5, 5, 5])


def test_split_partition_is_exact():
    d = make_dataset(n_trials=17, num_classes=3)
    train, valid = split_train_valid(d, 0.3, seed=2)
    assert train.n_trials + valid.n_trials == 17
    # every original trial appears exactly once across both partitions
    all_rows = np.vstack([train.trials.reshape(train.n_trials, -1),
                          valid.trials.reshape(valid.n_trials, -1)])
    orig_rows = d.trials.reshape(17, -1)
    matched = set()
    for row in all_rows:
        hits = np.nonzero((orig_rows == row).all(axis=1))[0]
        assert hits.size == 1
        assert int(hits[0]) not in matched
        matched.add(int(hits[0]))


def test_split_preserves_original_order():
    d = make_dataset(n_trials=12, num_classes=2)
    train, valid = split_train_valid(d, 0.25, seed=3)
    # labels alternate 0,1,...; order preservation means each partition's
    # trials appear in the same relative order as in the source
    def positions(part):
        orig = d.trials.reshape(12, -1)
        return [
            int(np.nonzero((orig == row).all(axis=1))[0][0])
            for row in part.trials.reshape(part.n_trials, -1)
        ]
    assert positions(train) == sorted(positions(train))
    assert positions(valid) == sorted(positions(valid))


def test_split_too_few_trials():
    with pytest.raises(TooFewTrials):
        split_train_valid(make_dataset(n_trials=1, num_classes=1), 0.5, 0)
    # fraction that rounds to everything
    with pytest.raises(TooFewTrials, match="cannot carve 2"):
        split_train_valid(make_dataset(n_trials=2), 0.9, 0)


def test_split_fraction_bounds():
    d = make_dataset()
    for f in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ConfigError):
            split_train_valid(d, f, 0)


def test_split_keeps_training_trial_for_tiny_class():
    # class 2 has two trials; both must never land in validation together
    labels = [0] * 8 + [1] * 8 + [2] * 2
    d = make_dataset(n_trials=18, num_classes=3)
    d = Dataset.create(d.trials, labels, [False] * 18, 250.0)
    for seed in range(20):
        train, _ = split_train_valid(d, 0.3, seed)
        assert (np.asarray(train.labels) == 2).sum() >= 1


@settings(max_examples=60, deadline=None)
@given(
    n_per_class=st.lists(st.integers(2, 12), min_size=1, max_size=4),
    frac=st.floats(0.1, 0.6),
    seed=st.integers(0, 10_000),
)
def test_split_proportions_within_one_trial(n_per_class, frac, seed):
    labels = np.concatenate([[c] * n for c, n in enumerate(n_per_class)])
    n = len(labels)
    n_valid = int(np.floor(frac * n + 0.5))
    if not (1 <= n_valid < n):
        return
    d = make_dataset(n_trials=n, num_classes=1)
    d = Dataset.create(d.trials, labels, [False] * n, 250.0)
    train, valid = split_train_valid(d, frac, seed)
    assert valid.n_trials == n_valid
    # stratification: each class within +-1 of its proportional share
    for c, n_c in enumerate(n_per_class):
        got = int((np.asarray(valid.labels) == c).sum())
        assert abs(got - frac * n_c) <= 1.0 + 1e-9
