"""Shared test scaffolding: dataset factories and an evaluator spy.

Kept deliberately dumb -- anything with logic worth testing lives in the
package, not here.
"""

from __future__ import annotations

import numpy as np

from eegselect.evaluator import Evaluator
from eegselect.tensorio import Dataset


def make_dataset(
    n_trials: int = 12,
    n_channels: int = 4,
    n_samples: int = 32,
    num_classes: int = 2,
    sample_rate_hz: float = 250.0,
    seed: int = 0,
    amplitude: float = 5.0,
    flags=None,
) -> Dataset:
    """Random dataset with round-robin labels (so classes stay balanced)."""
    rng = np.random.default_rng(seed)
    trials = rng.normal(0.0, amplitude, size=(n_trials, n_channels, n_samples))
    labels = np.arange(n_trials) % num_classes
    if flags is None:
        flags = np.zeros(n_trials, dtype=np.uint8)
    return Dataset.create(
        trials.astype(np.float32),
        labels.astype(np.uint16),
        np.asarray(flags, dtype=np.uint8),
        sample_rate_hz,
    )


def separable_dataset(
    n_trials: int = 24,
    n_channels: int = 6,
    n_samples: int = 40,
    good=(1, 3),
    seed: int = 0,
) -> Dataset:
    """Two-class data where only the `good` channels carry label signal,
    expressed as a variance gap the linear probe can pick up."""
    rng = np.random.default_rng(seed)
    trials = rng.normal(0.0, 1.0, size=(n_trials, n_channels, n_samples))
    labels = (np.arange(n_trials) % 2).astype(np.uint16)
    for ch in good:
        trials[labels == 1, ch, :] *= 6.0
    return Dataset.create(
        trials.astype(np.float32),
        labels,
        np.zeros(n_trials, dtype=np.uint8),
        250.0,
    )


class CountingEvaluator(Evaluator):
    """Forwards to a real evaluator and records every call that reaches it.

    The cache is supposed to shield evaluators from repeated subsets; the
    call log is how tests prove it did.
    """

    def __init__(self, inner: Evaluator) -> None:
        self.inner = inner
        self.calls: list[tuple] = []  # (subset, warm_key) in arrival order
        self.name = f"counting({inner.name})"

    @property
    def deterministic(self) -> bool:  # type: ignore[override]
        return self.inner.deterministic

    def evaluate(self, subset, ctx, warm_key=None):
        self.calls.append((subset, warm_key))
        return self.inner.evaluate(subset, ctx, warm_key=warm_key)

    def close(self) -> None:
        self.inner.close()
