"""Compact convolutional classifier for multichannel trial tensors.

The usual compact EEG recipe: a temporal convolution learns frequency
filters, a depthwise spatial convolution collapses the channel axis, and a
separable convolution plus pooling summarizes the envelope. Hyperparameters
default to the familiar compact setting (8 temporal filters, depth 2, 16
separable filters, dropout 0.1). Kernel and pool sizes clamp to the input
length so short windows -- like the 32-sample conformance tensors -- still
build a valid net.
"""

from __future__ import annotations

import torch
from torch import nn


class CompactConvNet(nn.Module):
    def __init__(
        self,
        n_channels: int,
        n_samples: int,
        num_classes: int,
        temporal_filters: int = 8,
        depth: int = 2,
        separable_filters: int = 16,
        dropout: float = 0.1,
    ) -> None:
        super().__init__()
        if n_channels < 1 or n_samples < 1 or num_classes < 2:
            raise ValueError(
                f"need channels >= 1, samples >= 1, classes >= 2; "
                f"got {n_channels}/{n_samples}/{num_classes}"
            )
        f1, f2 = temporal_filters, separable_filters
        spatial = f1 * depth
        # odd kernel lengths keep padding="same" exact (and torch quiet)
        kt = max(3, min(63, n_samples // 2)) | 1  # temporal kernel
        p1 = max(1, min(4, n_samples))            # first pool
        t1 = max(1, n_samples // p1)
        k2 = max(3, min(15, t1)) | 1              # separable kernel
        p2 = max(1, min(8, t1))                   # second pool
        t2 = max(1, t1 // p2)

        self.features = nn.Sequential(
            nn.Conv2d(1, f1, (1, kt), padding="same", bias=False),
            nn.BatchNorm2d(f1),
            nn.Conv2d(f1, spatial, (n_channels, 1), groups=f1, bias=False),
            nn.BatchNorm2d(spatial),
            nn.ELU(),
            nn.AvgPool2d((1, p1)),
            nn.Dropout(dropout),
            nn.Conv2d(spatial, spatial, (1, k2), padding="same",
                      groups=spatial, bias=False),
            nn.Conv2d(spatial, f2, 1, bias=False),
            nn.BatchNorm2d(f2),
            nn.ELU(),
            nn.AvgPool2d((1, p2)),
            nn.Dropout(dropout),
        )
        self.classify = nn.Linear(f2 * t2, num_classes)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        # x: (batch, 1, n_channels, n_samples)
        z = self.features(x)
        return self.classify(z.flatten(1))
