"""Dataset conversion between .npz archives and the v1 tensor format.

The npz side uses arrays `trials` (n, channels, samples), `labels` (n,),
optional `flags` (n, bool) and optional scalar `rate` -- the shape numpy
users end up with after epoching a raw recording. Direction is inferred
from the file extensions.
"""

from __future__ import annotations

import numpy as np

from .reader import read_tensor, write_tensor


def convert(src: str, dst: str, rate: float | None = None) -> None:
    if src.endswith(".npz") and dst.endswith(".sft"):
        with np.load(src) as z:
            if "trials" not in z or "labels" not in z:
                raise ValueError(f"{src}: needs 'trials' and 'labels' arrays")
            trials = z["trials"]
            labels = z["labels"]
            flags = z["flags"] if "flags" in z else np.zeros(len(labels), dtype=bool)
            if rate is None:
                rate = float(z["rate"]) if "rate" in z else None
        if rate is None:
            raise ValueError(f"{src}: no 'rate' array; pass --rate explicitly")
        write_tensor(dst, trials, labels, flags, rate)
    elif src.endswith(".sft") and dst.endswith(".npz"):
        d = read_tensor(src)
        np.savez(dst, trials=d.trials, labels=d.labels, flags=d.flags,
                 rate=d.sample_rate_hz)
    else:
        raise ValueError(
            f"cannot infer direction from {src!r} -> {dst!r}; "
            "use .npz -> .sft or .sft -> .npz"
        )
