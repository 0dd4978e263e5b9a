"""Trial conditioning: artifact rejection, task windowing, amplitude
normalization, and the stratified train/validation split.

Stages are pure functions Dataset -> Dataset so they can be reordered or
skipped by the caller; the pipeline applies them as
reject -> window -> normalize -> split.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AllTrialsRejected, ConfigError, TooFewTrials, WindowOutOfBounds
from .rng import substream
from .tensorio import Dataset


def _round_half_up(x: float) -> int:
    # round() is banker's rounding; all sizing here rounds .5 upward.
    return int(np.floor(x + 0.5))


@dataclass(frozen=True)
class WindowSpec:
    """Task window relative to trial start, in seconds.

    cue_onset_s is when the task cue appears; the window opens pre_cue_s
    before it and closes at task_end_s.
    """

    cue_onset_s: float = 2.0
    pre_cue_s: float = 0.5
    task_end_s: float = 6.0

    @property
    def start_s(self) -> float:
        return self.cue_onset_s - self.pre_cue_s

    def __post_init__(self) -> None:
        if self.pre_cue_s < 0:
            raise ConfigError(f"pre_cue_s must be >= 0, got {self.pre_cue_s}")
        if self.start_s < 0:
            raise ConfigError(
                f"window opens at {self.start_s} s, before trial start"
            )
        if self.task_end_s <= self.start_s:
            raise ConfigError(
                f"task_end_s {self.task_end_s} not after window start {self.start_s}"
            )


def reject_artifacts(dataset: Dataset) -> Dataset:
    """Drop every trial whose artifact flag is set. Relative order is kept."""
    keep = ~dataset.artifact_flags
    if not keep.any():
        raise AllTrialsRejected(
            f"all {dataset.n_trials} trials are flagged as artifacts"
        )
    return Dataset.create(
        dataset.trials[keep],
        dataset.labels[keep],
        np.zeros(int(keep.sum()), dtype=bool),
        dataset.sample_rate_hz,
        dataset.channel_names,
    )


def window_trials(dataset: Dataset, spec: WindowSpec) -> Dataset:
    """Crop each trial to [cue_onset - pre_cue, task_end).

    Sample indices come from rounding seconds * rate half-up; the default
    window (1.5 s to 6.0 s) at 250 Hz starts at sample 375 and keeps
    4.5 s * 250 = 1125 samples.
    """
    fs = dataset.sample_rate_hz
    start = _round_half_up(spec.start_s * fs)
    length = _round_half_up((spec.task_end_s - spec.start_s) * fs)
    if length < 1:
        raise WindowOutOfBounds(
            f"window [{spec.start_s}, {spec.task_end_s}) s is {length} samples at {fs} Hz"
        )
    if start + length > dataset.n_samples:
        raise WindowOutOfBounds(
            f"window needs samples [{start}, {start + length}) but trials have "
            f"{dataset.n_samples} samples"
        )
    return Dataset.create(
        dataset.trials[:, :, start : start + length],
        dataset.labels,
        dataset.artifact_flags,
        fs,
        dataset.channel_names,
    )


def normalize_amplitude(dataset: Dataset, limit_uv: float = 100.0) -> Dataset:
    """Scale by 1/limit_uv and clip to [-1, 1].

    Values already inside the limit map linearly; anything beyond saturates.
    """
    if limit_uv <= 0:
        raise ConfigError(f"amplitude limit must be positive, got {limit_uv}")
    scaled = np.clip(dataset.trials / np.float32(limit_uv), -1.0, 1.0)
    return Dataset.create(
        scaled,
        dataset.labels,
        dataset.artifact_flags,
        dataset.sample_rate_hz,
        dataset.channel_names,
    )


def _apportion(class_counts: np.ndarray, n_valid: int) -> np.ndarray:
    """Split n_valid across classes proportionally (largest remainder).

    Remainder ties break toward the lower class id. A class never gives up
    its last trial unless it only has one to give.
    """
    total = int(class_counts.sum())
    exact = class_counts * (n_valid / total)
    quota = np.floor(exact).astype(int)
    # keep at least one training trial per represented class where possible
    quota = np.minimum(quota, np.maximum(class_counts - 1, 0))
    short = n_valid - int(quota.sum())
    if short > 0:
        frac = exact - np.floor(exact)
        # sort by (-fractional part, class id): biggest remainder first
        order = np.lexsort((np.arange(len(class_counts)), -frac))
        for cls in order:
            if short == 0:
                break
            if quota[cls] < class_counts[cls] - 1 or (
                quota[cls] < class_counts[cls] and class_counts[cls] == 1
            ):
                quota[cls] += 1
                short -= 1
        # if still short, relax the keep-one-for-training rule
        for cls in order:
            if short == 0:
                break
            room = class_counts[cls] - quota[cls]
            take = min(room, short)
            quota[cls] += take
            short -= take
    return quota


def split_train_valid(
    dataset: Dataset, valid_fraction: float, seed: int
) -> tuple[Dataset, Dataset]:
    """Stratified split; returns (train, valid).

    Validation size is round-half-up(fraction * n). Each class contributes
    proportionally; which trials go to validation is drawn from a seeded
    substream per class, so the split is reproducible and independent of
    trial order within other classes. Both partitions preserve original
    trial order.
    """
    if not 0.0 < valid_fraction < 1.0:
        raise ConfigError(f"valid_fraction must be in (0, 1), got {valid_fraction}")
    n = dataset.n_trials
    n_valid = _round_half_up(valid_fraction * n)
    if n < 2 or n_valid < 1 or n_valid >= n:
        raise TooFewTrials(
            f"cannot carve {n_valid} validation trials out of {n}"
        )
    classes = np.unique(dataset.labels)
    counts = np.array([(dataset.labels == c).sum() for c in classes])
    quota = _apportion(counts, n_valid)

    valid_mask = np.zeros(n, dtype=bool)
    for cls, take in zip(classes, quota):
        if take == 0:
            continue
        idx = np.nonzero(dataset.labels == cls)[0]
        rng = substream(seed, "split", int(cls))
        chosen = rng.permutation(len(idx))[:take]
        valid_mask[idx[chosen]] = True

    def _subset(mask: np.ndarray) -> Dataset:
        return Dataset.create(
            dataset.trials[mask],
            dataset.labels[mask],
            dataset.artifact_flags[mask],
            dataset.sample_rate_hz,
            dataset.channel_names,
        )

    return _subset(~valid_mask), _subset(valid_mask)
