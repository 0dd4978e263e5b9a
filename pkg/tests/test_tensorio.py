"""Binary tensor format: layout, round trips, and corruption handling."""

from __future__ import annotations

import struct

import numpy as np
import pytest

from eegselect.errors import (
    IoFailure,
    LabelOutOfRange,
    MagicMismatch,
    TruncatedPayload,
    VersionUnsupported,
)
from eegselect.tensorio import (
    DTYPE_F32LE,
    FORMAT_VERSION,
    HEADER_SIZE,
    MAGIC,
    Dataset,
    load_dataset,
    save_dataset,
)
from helpers import make_dataset


def write_raw(path, n_trials, n_channels, n_samples, payload, *,
              magic=MAGIC, version=FORMAT_VERSION, dtype=DTYPE_F32LE,
              rate=250.0, labels=None, flags=None):
    """Assemble a file byte-by-byte, independent of save_dataset."""
    if labels is None:
        labels = b"\x00\x00" * n_trials
    if flags is None:
        flags = b"\x00" * n_trials
    header = struct.pack("<8s5Id", magic, version, n_trials, n_channels,
                         n_samples, dtype, rate)
    path.write_bytes(header + labels + flags + payload)
    return path


def test_header_is_36_bytes():
    assert HEADER_SIZE == 36


def test_minimal_file_loads(tmp_path):
    # 2 trials x 3 channels x 4 samples -> 96 payload bytes
    payload = np.arange(24, dtype="<f4").tobytes()
    assert len(payload) == 96
    p = write_raw(tmp_path / "d.sft", 2, 3, 4, payload,
                  labels=struct.pack("<2H", 0, 1))
    d = load_dataset(p)
    assert d.trials.shape == (2, 3, 4)
    assert d.trials.dtype == np.float32
    np.testing.assert_array_equal(d.trials.ravel(), np.arange(24, dtype=np.float32))
    assert list(d.labels) == [0, 1]
    assert d.sample_rate_hz == 250.0


def test_round_trip_random_tensors(tmp_path):
    rng = np.random.default_rng(42)
    for i, (n, c, t) in enumerate([(1, 1, 1), (5, 3, 17), (10, 22, 1125)]):
        d = Dataset.create(
            rng.normal(size=(n, c, t)).astype(np.float32),
            rng.integers(0, 4, size=n),
            rng.integers(0, 2, size=n).astype(bool),
            250.0,
        )
        p = tmp_path / f"rt{i}.sft"
        save_dataset(d, p)
        back = load_dataset(p)
        np.testing.assert_array_equal(back.trials, d.trials)
        np.testing.assert_array_equal(back.labels, d.labels)
        np.testing.assert_array_equal(back.artifact_flags, d.artifact_flags)
        assert back.sample_rate_hz == d.sample_rate_hz


def test_round_trip_preserves_exact_bits(tmp_path):
    # NaN payloads and denormals must survive; the codec is a container,
    # not a validator of signal plausibility
    vals = np.array([[[np.nan, np.inf, -np.inf, 1e-40]]], dtype=np.float32)
    d = Dataset.create(vals, [0], [False], 1.0)
    p = tmp_path / "bits.sft"
    save_dataset(d, p)
    back = load_dataset(p)
    assert back.trials.tobytes() == vals.tobytes()


def test_empty_file_rejected(tmp_path):
    p = tmp_path / "empty.sft"
    p.write_bytes(b"")
    with pytest.raises(TruncatedPayload, match="offset 0"):
        load_dataset(p)


def test_bad_magic(tmp_path):
    p = tmp_path / "bad.sft"
    p.write_bytes(b"NOTMAGIC" + b"\x00" * 40)
    with pytest.raises(MagicMismatch, match="offset 0"):
        load_dataset(p)


def test_unsupported_version(tmp_path):
    payload = np.zeros(24, dtype="<f4").tobytes()
    p = write_raw(tmp_path / "v9.sft", 2, 3, 4, payload, version=9)
    with pytest.raises(VersionUnsupported, match="version 9 at offset 8"):
        load_dataset(p)


def test_unsupported_dtype_tag(tmp_path):
    payload = np.zeros(24, dtype="<f4").tobytes()
    p = write_raw(tmp_path / "dt.sft", 2, 3, 4, payload, dtype=7)
    with pytest.raises(VersionUnsupported, match="offset 24"):
        load_dataset(p)


def test_truncated_payload(tmp_path):
    payload = np.zeros(24, dtype="<f4").tobytes()[:-1]  # 95 of 96 bytes
    p = write_raw(tmp_path / "tr.sft", 2, 3, 4, payload)
    with pytest.raises(TruncatedPayload, match="only 95 present"):
        load_dataset(p)


def test_truncated_header(tmp_path):
    p = tmp_path / "th.sft"
    p.write_bytes(MAGIC + b"\x01\x00")
    with pytest.raises(TruncatedPayload, match="header needs 36"):
        load_dataset(p)


def test_trailing_bytes_ignored(tmp_path):
    payload = np.arange(24, dtype="<f4").tobytes()
    p = write_raw(tmp_path / "tail.sft", 2, 3, 4, payload + b"GARBAGE")
    d = load_dataset(p)
    assert d.trials.shape == (2, 3, 4)
    np.testing.assert_array_equal(d.trials.ravel(), np.arange(24, dtype=np.float32))


def test_label_out_of_range_names_offset(tmp_path):
    payload = np.zeros(24, dtype="<f4").tobytes()
    labels = struct.pack("<2H", 0, 5)
    p = write_raw(tmp_path / "lbl.sft", 2, 3, 4, payload, labels=labels)
    # second label sits at byte 36 + 2
    with pytest.raises(LabelOutOfRange, match="trial 1 label 5 .* offset 38"):
        load_dataset(p, num_classes=4)
    # without a class count the file is taken at face value
    assert load_dataset(p).num_classes == 6


def test_zero_trial_file_round_trips(tmp_path):
    # header-only datasets are legal containers; trial-count minimums are
    # the splitter's business, not the codec's
    d = Dataset.create(np.zeros((0, 3, 4), np.float32), [], [], 100.0)
    p = tmp_path / "n0.sft"
    save_dataset(d, p)
    back = load_dataset(p)
    assert back.n_trials == 0 and back.n_channels == 3


def test_missing_file_is_io_failure(tmp_path):
    with pytest.raises(IoFailure):
        load_dataset(tmp_path / "nope.sft")


def test_create_rejects_bad_shapes():
    with pytest.raises(ValueError, match="3-axis"):
        Dataset.create(np.zeros((2, 3), np.float32), [0, 1], [0, 0], 250.0)
    with pytest.raises(ValueError, match=">= 1 channel"):
        Dataset.create(np.zeros((2, 0, 4), np.float32), [0, 1], [0, 0], 250.0)
    with pytest.raises(ValueError, match="axis mismatch"):
        Dataset.create(np.zeros((2, 3, 4), np.float32), [0], [0, 0], 250.0)
    with pytest.raises(ValueError, match="negative label"):
        Dataset.create(np.zeros((1, 3, 4), np.float32), [-1], [0], 250.0)
    with pytest.raises(ValueError, match="sample_rate"):
        Dataset.create(np.zeros((1, 3, 4), np.float32), [0], [0], 0.0)


def test_save_rejects_oversized_labels(tmp_path):
    d = Dataset.create(np.zeros((1, 2, 2), np.float32), [70000], [False], 250.0)
    with pytest.raises(ValueError, match="u16"):
        save_dataset(d, tmp_path / "big.sft")


def test_save_unwritable_path_is_io_failure(tmp_path):
    d = make_dataset(n_trials=2)
    with pytest.raises(IoFailure):
        save_dataset(d, tmp_path / "no" / "such" / "dir.sft")


def test_arrays_are_read_only():
    d = make_dataset()
    with pytest.raises(ValueError):
        d.trials[0, 0, 0] = 1.0
    with pytest.raises(ValueError):
        d.labels[0] = 3


def test_create_copies_input():
    src = np.ones((2, 2, 2), dtype=np.float32)
    labels = np.array([0, 1])
    d = Dataset.create(src, labels, [False, False], 250.0)
    labels[0] = 9
    assert d.labels[0] == 0
    # contiguous float32 input may be shared; mutation through the original
    # is the caller's foot-gun, but non-contiguous input must be copied
    strided = np.ones((2, 4, 2), dtype=np.float32)[:, ::2, :]
    d2 = Dataset.create(strided, [0, 1], [False, False], 250.0)
    assert d2.trials.flags["C_CONTIGUOUS"]


def test_channel_names_optional_and_checked():
    d = make_dataset(n_channels=3)
    assert d.channel_names is None
    named = Dataset.create(d.trials, d.labels, d.artifact_flags, 250.0,
                           channel_names=("C3", "Cz", "C4"))
    assert named.channel_names == ("C3", "Cz", "C4")
    with pytest.raises(ValueError, match="channel names"):
        Dataset.create(d.trials, d.labels, d.artifact_flags, 250.0,
                       channel_names=("C3",))


def test_num_classes_from_labels():
    assert make_dataset(num_classes=4).num_classes == 4
    assert Dataset.create(np.zeros((0, 2, 2), np.float32), [], [], 250.0).num_classes == 0
