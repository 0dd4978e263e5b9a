"""Load/save EEG trial datasets in the v1 binary tensor format.

Byte layout of a v1 file (all integers little-endian):

    offset  size                 field
    0       8                    magic, ASCII "SFTENS01"
    8       4   u32              format version (1)
    12      4   u32              n_trials
    16      4   u32              n_channels
    20      4   u32              n_samples
    24      4   u32              dtype tag (0 = float32 little-endian)
    28      8   f64              sample_rate_hz
    36      2*n_trials  u16[]    per-trial class labels (0-based)
    ...     1*n_trials  u8[]     per-trial artifact flags (nonzero = bad)
    ...     4*n_trials*n_channels*n_samples   tensor payload, row-major
                                 (trial-major, then channel, then time)

The same layout is documented in docs/tensor-format-v1.md. Trailing bytes
after the declared payload are ignored; the loader never interprets them.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    IoFailure,
    LabelOutOfRange,
    MagicMismatch,
    TruncatedPayload,
    VersionUnsupported,
)

MAGIC = b"SFTENS01"
FORMAT_VERSION = 1
DTYPE_F32LE = 0

_HEADER = struct.Struct("<8s5Id")
HEADER_SIZE = _HEADER.size  # 36 bytes


@dataclass(frozen=True, eq=False)
class Dataset:
    """In-memory trial tensor with labels and artifact flags.

    trials has shape (n_trials, n_channels, n_samples), float32 microvolts.
    Arrays are marked read-only; all transforms return new Datasets.
    """

    trials: np.ndarray
    labels: np.ndarray
    artifact_flags: np.ndarray
    sample_rate_hz: float
    channel_names: tuple[str, ...] | None = None

    @classmethod
    def create(
        cls,
        trials: np.ndarray,
        labels: Sequence[int],
        artifact_flags: Sequence[bool],
        sample_rate_hz: float,
        channel_names: Iterable[str] | None = None,
    ) -> "Dataset":
        trials = np.ascontiguousarray(trials, dtype=np.float32)
        labels = np.asarray(labels, dtype=np.int64).copy()
        flags = np.asarray(artifact_flags, dtype=bool).copy()
        names = tuple(channel_names) if channel_names is not None else None
        d = cls(trials, labels, flags, float(sample_rate_hz), names)
        d.validate()
        for arr in (d.trials, d.labels, d.artifact_flags):
            arr.setflags(write=False)
        return d

    def validate(self) -> None:
        if self.trials.ndim != 3:
            raise ValueError(f"trials must be 3-axis, got shape {self.trials.shape}")
        n, c, t = self.trials.shape
        if c < 1 or t < 1:
            raise ValueError(f"need >= 1 channel and >= 1 sample, got shape {self.trials.shape}")
        if len(self.labels) != n or len(self.artifact_flags) != n:
            raise ValueError(
                f"axis mismatch: {n} trials vs {len(self.labels)} labels "
                f"vs {len(self.artifact_flags)} flags"
            )
        if n and self.labels.min() < 0:
            raise ValueError(f"negative label {self.labels.min()}")
        if self.sample_rate_hz <= 0:
            raise ValueError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        if self.channel_names is not None and len(self.channel_names) != c:
            raise ValueError(
                f"{len(self.channel_names)} channel names for {c} channels"
            )

    @property
    def n_trials(self) -> int:
        return self.trials.shape[0]

    @property
    def n_channels(self) -> int:
        return self.trials.shape[1]

    @property
    def n_samples(self) -> int:
        return self.trials.shape[2]

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0


def load_dataset(path: str | os.PathLike, num_classes: int | None = None) -> Dataset:
    """Read a v1 tensor file.

    If num_classes is given, every label is checked against it and the first
    offender is reported with its file offset.
    """
    try:
        with open(path, "rb") as fh:
            buf = fh.read()
    except OSError as e:
        raise IoFailure(f"cannot read {path}: {e}") from e

    if len(buf) < len(MAGIC):
        raise TruncatedPayload(
            f"{path}: file is {len(buf)} bytes, too short for the 8-byte magic at offset 0"
        )
    if buf[: len(MAGIC)] != MAGIC:
        raise MagicMismatch(
            f"{path}: bad magic {buf[:len(MAGIC)]!r} at offset 0, expected {MAGIC!r}"
        )
    if len(buf) < HEADER_SIZE:
        raise TruncatedPayload(
            f"{path}: file is {len(buf)} bytes, header needs {HEADER_SIZE}"
        )

    _, version, n_trials, n_channels, n_samples, dtype_tag, rate = _HEADER.unpack_from(buf, 0)
    if version != FORMAT_VERSION:
        raise VersionUnsupported(f"{path}: version {version} at offset 8, only {FORMAT_VERSION} supported")
    if dtype_tag != DTYPE_F32LE:
        raise VersionUnsupported(f"{path}: dtype tag {dtype_tag} at offset 24, only {DTYPE_F32LE} (f32le) in v1")
    if n_channels < 1 or n_samples < 1:
        raise TruncatedPayload(
            f"{path}: header declares n_channels={n_channels}, n_samples={n_samples}; both must be >= 1"
        )
    if rate <= 0 or not np.isfinite(rate):
        raise VersionUnsupported(f"{path}: invalid sample_rate_hz {rate} at offset 28")

    labels_off = HEADER_SIZE
    flags_off = labels_off + 2 * n_trials
    payload_off = flags_off + n_trials
    payload_len = 4 * n_trials * n_channels * n_samples
    if len(buf) < payload_off:
        raise TruncatedPayload(
            f"{path}: labels/flags section needs {payload_off} bytes, file has {len(buf)}"
        )
    if len(buf) < payload_off + payload_len:
        raise TruncatedPayload(
            f"{path}: payload at offset {payload_off} declares {payload_len} bytes, "
            f"only {len(buf) - payload_off} present"
        )

    labels = np.frombuffer(buf, dtype="<u2", count=n_trials, offset=labels_off).astype(np.int64)
    flags = np.frombuffer(buf, dtype="u1", count=n_trials, offset=flags_off) != 0
    if num_classes is not None:
        bad = np.nonzero(labels >= num_classes)[0]
        if bad.size:
            i = int(bad[0])
            raise LabelOutOfRange(
                f"{path}: trial {i} label {int(labels[i])} >= num_classes {num_classes} "
                f"at offset {labels_off + 2 * i}"
            )
    tensor = (
        np.frombuffer(buf, dtype="<f4", count=n_trials * n_channels * n_samples, offset=payload_off)
        .reshape(n_trials, n_channels, n_samples)
        .copy()
    )
    return Dataset.create(tensor, labels, flags, rate)


def save_dataset(dataset: Dataset, path: str | os.PathLike) -> None:
    """Write a v1 tensor file; load_dataset reads it back bit-exactly."""
    dataset.validate()
    if len(dataset.labels) and int(dataset.labels.max()) > 0xFFFF:
        raise ValueError(f"label {int(dataset.labels.max())} does not fit in u16")
    header = _HEADER.pack(
        MAGIC,
        FORMAT_VERSION,
        dataset.n_trials,
        dataset.n_channels,
        dataset.n_samples,
        DTYPE_F32LE,
        float(dataset.sample_rate_hz),
    )
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(dataset.labels.astype("<u2").tobytes())
            fh.write(dataset.artifact_flags.astype("u1").tobytes())
            fh.write(np.ascontiguousarray(dataset.trials, dtype="<f4").tobytes())
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e
