"""One evaluate request: train (or fine-tune) the net on a channel subset
and score validation accuracy.

Warm starts: every response carries a state key naming a checkpoint under
the state directory. When the host sends that key back as `warm_key`, the
checkpoint is loaded and trained for the (much smaller) warm epoch count
instead of from scratch. An unknown or stale key falls back to cold
training -- slower, still correct.

Epoch counts, batch size, and learning rate are this plugin's own defaults
(Adam 1e-3, batch 16, 60 cold / 5 warm epochs); the trial windows say
nothing about how to train on them.
"""

from __future__ import annotations

import hashlib
import os
from typing import Callable, Sequence

import numpy as np
import torch
from torch import nn

from .model import CompactConvNet
from .reader import read_tensor

COLD_EPOCHS = 60
WARM_EPOCHS = 5
BATCH_SIZE = 16
LEARNING_RATE = 1e-3


def _load_split(path: str, subset: Sequence[int]) -> tuple[torch.Tensor, torch.Tensor]:
    data = read_tensor(path)
    n_channels = data.trials.shape[1]
    for ch in subset:
        if not 0 <= ch < n_channels:
            raise ValueError(
                f"channel {ch} out of range for {n_channels}-channel file {path}"
            )
    x = torch.from_numpy(data.trials[:, list(subset), :]).unsqueeze(1)
    y = torch.from_numpy(data.labels)
    return x, y


def _state_key(subset: Sequence[int], warm_key: str | None) -> str:
    """Checkpoint names: s<channels>-v<version>, version bumping per warm pass."""
    version = 1
    if warm_key:
        head, _, tail = warm_key.rpartition("-v")
        if head and tail.isdigit():
            version = int(tail) + 1
    return "s" + "-".join(str(c) for c in subset) + f"-v{version}"


def _seed_for(subset: Sequence[int], warm_key: str | None) -> int:
    tag = f"{tuple(subset)}|{warm_key}".encode()
    return int.from_bytes(hashlib.sha256(tag).digest()[:4], "little")


def _train(net: nn.Module, x: torch.Tensor, y: torch.Tensor,
           epochs: int, batch_size: int, lr: float, seed: int) -> None:
    gen = torch.Generator().manual_seed(seed)
    opt = torch.optim.Adam(net.parameters(), lr=lr)
    loss_fn = nn.CrossEntropyLoss()
    net.train()
    n = len(x)
    bs = max(2, min(batch_size, n))
    for _ in range(epochs):
        perm = torch.randperm(n, generator=gen)
        for start in range(0, n, bs):
            idx = perm[start:start + bs]
            if len(idx) == 1:
                continue  # batch norm cannot train on a single sample
            opt.zero_grad()
            loss_fn(net(x[idx]), y[idx]).backward()
            opt.step()


def _accuracy(net: nn.Module, x: torch.Tensor, y: torch.Tensor) -> float:
    if len(y) == 0:
        return 0.0
    net.eval()
    with torch.no_grad():
        pred = net(x).argmax(dim=1)
    return float((pred == y).float().mean())


def evaluate_subset(
    subset: Sequence[int],
    train_path: str,
    valid_path: str,
    state_dir: str,
    warm_key: str | None = None,
    cold_epochs: int = COLD_EPOCHS,
    warm_epochs: int = WARM_EPOCHS,
    batch_size: int = BATCH_SIZE,
    lr: float = LEARNING_RATE,
    log: Callable[[str], None] = lambda _: None,
) -> tuple[float, str]:
    """Returns (validation accuracy in [0, 1], state key for next time)."""
    subset = sorted(int(c) for c in subset)
    if not subset:
        raise ValueError("empty channel subset")
    xt, yt = _load_split(train_path, subset)
    xv, yv = _load_split(valid_path, subset)
    if len(xt) < 2:
        raise ValueError(f"training split has {len(xt)} trials, need at least 2")
    labels = np.concatenate([yt.numpy(), yv.numpy()]) if len(yv) else yt.numpy()
    num_classes = max(int(labels.max()) + 1, 2)

    seed = _seed_for(subset, warm_key)
    torch.manual_seed(seed)  # layer init and dropout also draw from the global stream
    net = CompactConvNet(len(subset), xt.shape[-1], num_classes)
    epochs = cold_epochs
    warmed = False
    if warm_key:
        ckpt = os.path.join(state_dir, warm_key + ".pt")
        if os.path.exists(ckpt):
            net.load_state_dict(torch.load(ckpt, map_location="cpu", weights_only=True))
            epochs = warm_epochs
            warmed = True
        else:
            log(f"warm key {warm_key!r} has no checkpoint; training cold")

    _train(net, xt, yt, epochs, batch_size, lr, seed)
    acc = _accuracy(net, xv, yv)

    key = _state_key(subset, warm_key if warmed else None)
    os.makedirs(state_dir, exist_ok=True)
    torch.save(net.state_dict(), os.path.join(state_dir, key + ".pt"))
    log(f"subset={','.join(map(str, subset))} "
        f"{'warm' if warmed else 'cold'} epochs={epochs} acc={acc:.4f} -> {key}")
    return acc, key
