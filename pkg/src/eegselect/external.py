"""Client side of evaluator wire protocol v1, plus the conformance harness
behind `eegselect plugin-check`.

A plugin is any executable speaking newline-delimited JSON on stdio:

    child -> {"op": "hello", "protocol": 1, "name": "..."}     (first line)
    us    -> {"id": 7, "op": "evaluate", "subset": [0, 3], "warm_key": null,
              "train": "/path/train.sft", "valid": "/path/valid.sft"}
    child -> {"id": 7, "fitness": 0.82, "state_key": "ck-1", "error": null}
    us    -> {"op": "bye"}                                     (child exits 0 in 5 s)

Anything else on the child's stdout is a protocol violation; stderr passes
through untouched for diagnostics. One client = one child = one in-flight
request; parallelism comes from a pool of clients.
"""

from __future__ import annotations

import json
import queue
import shlex
import subprocess
import threading
from typing import Sequence

from .errors import (
    ChildExited,
    EvaluatorFailure,
    ProtocolViolation,
    ScoreOutOfRange,
    Timeout,
)
from .evaluator import EvalContext, Evaluator, FitnessRecord
from .subsets import ChannelSubset

PROTOCOL_VERSION = 1
BYE_GRACE_S = 5.0

_EOF = object()


class PluginClient:
    """Owns one child process and serializes requests over its stdio."""

    def __init__(
        self,
        command: Sequence[str],
        handshake_timeout: float = 10.0,
        response_timeout: float | None = 600.0,
    ) -> None:
        self.command = list(command)
        self.response_timeout = response_timeout
        self._next_id = 0
        self._closed = False
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=None,  # inherit: plugin diagnostics go to our stderr
                text=True,
                bufsize=1,
            )
        except OSError as e:
            raise ChildExited(f"cannot launch {self.command}: {e}") from e
        # Reader thread so we can time out without losing data or blocking
        # on a dead pipe.
        self._lines: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        self.plugin_name = self._handshake(handshake_timeout)

    def _pump(self) -> None:
        try:
            for line in self._proc.stdout:
                self._lines.put(line)
        finally:
            self._lines.put(_EOF)

    def _next_line(self, timeout: float | None) -> str:
        try:
            line = self._lines.get(timeout=timeout)
        except queue.Empty:
            raise Timeout(
                f"plugin {self.command[0]} sent nothing for {timeout} s"
            ) from None
        if line is _EOF:
            # stdout closing races the process exit; wait a moment so the
            # error can report the real status instead of None
            try:
                code = self._proc.wait(timeout=BYE_GRACE_S)
            except subprocess.TimeoutExpired:
                code = self._proc.poll()
            raise ChildExited(
                f"plugin {self.command[0]} closed its stdout (exit status {code})"
            )
        return line

    def _read_message(self, timeout: float | None) -> dict:
        line = self._next_line(timeout)
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as e:
            raise ProtocolViolation(
                f"plugin {self.command[0]} wrote a non-JSON line: {line!r}"
            ) from e
        if not isinstance(msg, dict):
            raise ProtocolViolation(
                f"plugin {self.command[0]} wrote a JSON {type(msg).__name__}, expected an object"
            )
        return msg

    def _handshake(self, timeout: float) -> str:
        msg = self._read_message(timeout)
        if msg.get("op") != "hello":
            raise ProtocolViolation(f"first line must be a hello, got {msg!r}")
        if msg.get("protocol") != PROTOCOL_VERSION:
            raise ProtocolViolation(
                f"plugin speaks protocol {msg.get('protocol')!r}, "
                f"only {PROTOCOL_VERSION} supported"
            )
        name = msg.get("name")
        if not isinstance(name, str) or not name:
            raise ProtocolViolation(f"hello carries no usable name: {msg!r}")
        return name

    def _send(self, msg: dict) -> None:
        if self._proc.poll() is not None:
            raise ChildExited(
                f"plugin {self.command[0]} already exited with status {self._proc.poll()}"
            )
        try:
            self._proc.stdin.write(json.dumps(msg) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            raise ChildExited(f"plugin {self.command[0]} pipe broke: {e}") from e

    def evaluate(
        self,
        subset: ChannelSubset,
        train_path: str,
        valid_path: str,
        warm_key: str | None = None,
    ) -> FitnessRecord:
        request_id = self._next_id
        self._next_id += 1
        self._send(
            {
                "id": request_id,
                "op": "evaluate",
                "subset": list(subset.members),
                "warm_key": warm_key,
                "train": str(train_path),
                "valid": str(valid_path),
            }
        )
        msg = self._read_message(self.response_timeout)
        if msg.get("id") != request_id:
            raise ProtocolViolation(
                f"response id {msg.get('id')!r} does not match request id {request_id}"
            )
        if msg.get("error"):
            raise EvaluatorFailure(
                f"plugin {self.plugin_name} reported: {msg['error']}"
            )
        fitness = msg.get("fitness")
        if not isinstance(fitness, (int, float)) or isinstance(fitness, bool):
            raise ProtocolViolation(f"fitness is {fitness!r}, expected a number")
        if not 0.0 <= float(fitness) <= 1.0:
            raise ScoreOutOfRange(
                f"plugin {self.plugin_name} returned fitness {fitness} for {subset}"
            )
        state_key = msg.get("state_key")
        if state_key is not None and not isinstance(state_key, str):
            raise ProtocolViolation(f"state_key is {state_key!r}, expected string or null")
        return FitnessRecord(
            float(fitness), state_key or "", fresh=warm_key is None
        )

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        if self._proc.poll() is None:
            try:
                self._send({"op": "bye"})
            except ChildExited:
                pass
            try:
                self._proc.wait(timeout=BYE_GRACE_S)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
        if self._proc.stdin:
            self._proc.stdin.close()

    def __enter__(self) -> "PluginClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class ExternalEvaluator(Evaluator):
    """Evaluator backed by a pool of plugin processes.

    Each wire request rides one client; a queue hands clients out so there
    is exactly one in-flight request per child. Treated as stochastic: a
    repeat subset goes back over the wire with its stored state key and the
    plugin decides what the warm start means.
    """

    deterministic = False

    def __init__(self, command: str | Sequence[str], pool_size: int = 1) -> None:
        if isinstance(command, str):
            command = shlex.split(command)
        if pool_size < 1:
            raise ValueError(f"pool_size must be >= 1, got {pool_size}")
        self.command = list(command)
        self._idle: queue.Queue[PluginClient] = queue.Queue()
        self._clients: list[PluginClient] = []
        try:
            for _ in range(pool_size):
                client = PluginClient(self.command)
                self._clients.append(client)
                self._idle.put(client)
        except Exception:
            self.close()
            raise
        self.name = f"external:{self._clients[0].plugin_name}"

    def evaluate(
        self, subset: ChannelSubset, ctx: EvalContext, warm_key: str | None = None
    ) -> FitnessRecord:
        if ctx.train_path is None or ctx.valid_path is None:
            raise EvaluatorFailure(
                "external evaluator needs on-disk train/valid datasets "
                "(EvalContext.train_path/valid_path)"
            )
        client = self._idle.get()
        try:
            return client.evaluate(subset, ctx.train_path, ctx.valid_path, warm_key)
        finally:
            self._idle.put(client)

    def close(self) -> None:
        for client in self._clients:
            client.close()
        self._clients.clear()


def run_conformance(command: str | Sequence[str], workdir: str) -> list[tuple[str, str]]:
    """Exercise a plugin against the protocol and report per-check results.

    Returns [(check_name, detail), ...] for the checks that passed; raises
    the first failure as the matching protocol error. Uses tiny synthetic
    datasets written under workdir, so no recordings are needed.
    """
    import os

    import numpy as np

    from .rng import substream
    from .tensorio import Dataset, save_dataset

    rng = substream(7, "conformance")
    trials = rng.normal(0.0, 0.3, size=(12, 4, 32)).astype(np.float32)
    labels = np.arange(12) % 2
    # separate the classes on channel 1 so a real classifier can score > chance
    trials[labels == 1, 1, :] += 1.5
    data = Dataset.create(trials, labels, np.zeros(12, dtype=bool), 32.0)
    os.makedirs(workdir, exist_ok=True)
    train_path = os.path.join(workdir, "conformance-train.sft")
    valid_path = os.path.join(workdir, "conformance-valid.sft")
    save_dataset(data, train_path)
    save_dataset(data, valid_path)

    results: list[tuple[str, str]] = []
    subset_a = ChannelSubset((0, 1), 4)
    subset_b = ChannelSubset((2, 3), 4)

    client = PluginClient(shlex.split(command) if isinstance(command, str) else command)
    try:
        results.append(("handshake", f"hello from {client.plugin_name!r}, protocol 1"))

        rec = client.evaluate(subset_a, train_path, valid_path)
        results.append(("evaluate", f"fitness {rec.score:.4f}, state_key {rec.state_key!r}"))

        warm = client.evaluate(subset_a, train_path, valid_path, warm_key=rec.state_key)
        results.append(("warm-start", f"accepted warm_key, fitness {warm.score:.4f}"))

        other = client.evaluate(subset_b, train_path, valid_path)
        results.append(("id-correlation", f"second subset answered in order, fitness {other.score:.4f}"))

        try:
            client.evaluate(subset_a, os.path.join(workdir, "no-such-file.sft"), valid_path)
        except EvaluatorFailure as e:
            if isinstance(e, (ProtocolViolation, ChildExited, Timeout)):
                raise
            results.append(("error-in-band", f"bad path reported in-band: {e}"))
        else:
            raise ProtocolViolation(
                "plugin returned success for a nonexistent training file; "
                "expected an in-band error"
            )
        # the child must survive its own error report
        again = client.evaluate(subset_a, train_path, valid_path)
        results.append(("error-recovery", f"still serving after error, fitness {again.score:.4f}"))
    finally:
        client.close()

    code = client._proc.returncode
    if code != 0:
        raise ChildExited(f"plugin exited with status {code} after bye, expected 0")
    results.append(("shutdown", "clean exit 0 after bye"))
    return results
