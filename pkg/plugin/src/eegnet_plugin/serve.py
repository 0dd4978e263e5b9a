"""Wire-protocol v1 server: newline-delimited JSON on stdin/stdout.

stdout carries protocol messages only; all diagnostics (including the
per-request epoch audit lines) go to stderr. Failures inside an evaluation
are reported in-band via the `error` field and the loop keeps serving;
only `bye` or stdin closing ends the process.
"""

from __future__ import annotations

import json
import sys
import tempfile

from .training import (
    BATCH_SIZE,
    COLD_EPOCHS,
    LEARNING_RATE,
    WARM_EPOCHS,
    evaluate_subset,
)

PROTOCOL_VERSION = 1
PLUGIN_NAME = "eegnet-torch"


def _log(msg: str) -> None:
    print(f"[eegnet-plugin] {msg}", file=sys.stderr, flush=True)


def _send(msg: dict) -> None:
    sys.stdout.write(json.dumps(msg) + "\n")
    sys.stdout.flush()


def serve(
    state_dir: str | None = None,
    cold_epochs: int = COLD_EPOCHS,
    warm_epochs: int = WARM_EPOCHS,
    batch_size: int = BATCH_SIZE,
    lr: float = LEARNING_RATE,
) -> int:
    if state_dir is None:
        state_dir = tempfile.mkdtemp(prefix="eegnet-plugin-state-")
        _log(f"checkpoints in {state_dir}")

    _send({"op": "hello", "protocol": PROTOCOL_VERSION, "name": PLUGIN_NAME})

    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            msg = json.loads(line)
        except json.JSONDecodeError:
            _log(f"dropping undecodable request line {line!r}")
            continue

        op = msg.get("op")
        if op == "bye":
            return 0
        if op != "evaluate":
            _send({"id": msg.get("id"), "fitness": None, "state_key": None,
                   "error": f"unknown op {op!r}"})
            continue

        try:
            fitness, state_key = evaluate_subset(
                msg["subset"],
                msg["train"],
                msg["valid"],
                state_dir,
                warm_key=msg.get("warm_key") or None,
                cold_epochs=cold_epochs,
                warm_epochs=warm_epochs,
                batch_size=batch_size,
                lr=lr,
                log=_log,
            )
            _send({"id": msg["id"], "fitness": fitness,
                   "state_key": state_key, "error": None})
        except Exception as e:  # anything request-scoped is an in-band error
            _send({"id": msg.get("id"), "fitness": None, "state_key": None,
                   "error": f"{type(e).__name__}: {e}"})

    return 0  # host vanished without a bye; exit quietly
