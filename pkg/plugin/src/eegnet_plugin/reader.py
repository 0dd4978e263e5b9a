"""Self-contained reader/writer for the v1 trial-tensor format.

Deliberately independent of the host package: the file format and the wire
protocol are the only contracts the plugin shares with it. Byte layout:
36-byte header `<8s5Id` (magic "SFTENS01", version, n_trials, n_channels,
n_samples, dtype tag 0 = f32le, sample rate f64), then u16 labels, u8
artifact flags, and the row-major float32 payload. Trailing bytes are
ignored.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"SFTENS01"
_HEADER = struct.Struct("<8s5Id")


@dataclass(frozen=True)
class TrialTensor:
    trials: np.ndarray  # (n_trials, n_channels, n_samples) float32
    labels: np.ndarray  # (n_trials,) int64
    flags: np.ndarray   # (n_trials,) bool, True = contaminated
    sample_rate_hz: float


def read_tensor(path: str) -> TrialTensor:
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < _HEADER.size:
        raise ValueError(f"{path}: {len(buf)} bytes, too short for the 36-byte header")
    magic, version, n, c, t, dtype_tag, rate = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != 1 or dtype_tag != 0:
        raise ValueError(f"{path}: unsupported version {version} / dtype tag {dtype_tag}")
    if c < 1 or t < 1 or rate <= 0:
        raise ValueError(f"{path}: nonsense header ({c} channels, {t} samples, {rate} Hz)")
    need = _HEADER.size + 3 * n + 4 * n * c * t
    if len(buf) < need:
        raise ValueError(f"{path}: header promises {need} bytes, file has {len(buf)}")
    off = _HEADER.size
    labels = np.frombuffer(buf, "<u2", n, off).astype(np.int64)
    flags = np.frombuffer(buf, "u1", n, off + 2 * n) != 0
    trials = (
        np.frombuffer(buf, "<f4", n * c * t, off + 3 * n).reshape(n, c, t).copy()
    )
    return TrialTensor(trials, labels, flags, float(rate))


def write_tensor(path: str, trials, labels, flags, sample_rate_hz: float) -> None:
    trials = np.ascontiguousarray(trials, dtype="<f4")
    if trials.ndim != 3:
        raise ValueError(f"trials must be (n, channels, samples), got {trials.shape}")
    n, c, t = trials.shape
    labels = np.asarray(labels)
    flags = np.asarray(flags, dtype=bool)
    if len(labels) != n or len(flags) != n:
        raise ValueError(f"{n} trials vs {len(labels)} labels / {len(flags)} flags")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, 1, n, c, t, 0, float(sample_rate_hz)))
        fh.write(labels.astype("<u2").tobytes())
        fh.write(flags.astype("u1").tobytes())
        fh.write(trials.tobytes())
