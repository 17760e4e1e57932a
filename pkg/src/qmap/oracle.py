"""Accuracy oracles: a deterministic built-in surrogate and a client for an
external training process.

The surrogate charges every layer a penalty that grows as its activation or
weight width shrinks below 8 bits, weighted by the layer's share of the
network's MACs.  It is a pure function chosen to give the search non-trivial
Pareto structure; it makes no claim of fidelity to any trained model.

The external client speaks newline-delimited JSON over a child process's
standard streams, one in-flight request per process:

    request   {"id": 7, "network": "...", "genome": [8, 8, ...], "epochs": 5}
    response  {"id": 7, "status": "ok", "top1": 0.71}
              {"id": 3, "status": "error", "message": "..."}

Responses for unknown (stale) ids are skipped with a warning.  On transport
failure the process is restarted and the request retried once with the same
id.
"""

from __future__ import annotations

import json
import logging
import queue
import subprocess
import threading
from dataclasses import dataclass

from .search import OracleError
from .workload import Genome, NetworkSpec, layer_macs

log = logging.getLogger(__name__)

SURROGATE_BASE_ACCURACY = 0.77
_PENALTY_AT_2 = 0.33
_PENALTY_EXPONENT = 1.6


@dataclass(frozen=True)
class AccuracyRequest:
    request_id: int
    network: str
    genome: Genome
    epochs: int

    def to_json_line(self) -> str:
        return json.dumps(
            {"id": self.request_id, "network": self.network,
             "genome": list(self.genome), "epochs": self.epochs}
        )


@dataclass(frozen=True)
class AccuracyResponse:
    request_id: int | None
    status: str
    top1: float | None = None
    message: str | None = None

    @classmethod
    def from_json_line(cls, line: str) -> "AccuracyResponse":
        doc = json.loads(line)
        return cls(
            request_id=doc.get("id"),
            status=doc.get("status", "error"),
            top1=doc.get("top1"),
            message=doc.get("message"),
        )


def _bit_penalty(bits: int) -> float:
    if bits >= 8:
        return 0.0
    return _PENALTY_AT_2 * ((8 - bits) / 6.0) ** _PENALTY_EXPONENT


def surrogate_accuracy(genome: Genome, net: NetworkSpec) -> float:
    """Deterministic stand-in for QAT accuracy; MAC-weighted bit penalties."""
    if len(genome) != 2 * len(net):
        raise OracleError(f"genome length {len(genome)} != 2 x {len(net)} layers")
    macs = [layer_macs(layer) for layer in net.layers]
    total = sum(macs)
    penalty = 0.0
    for i in range(len(net)):
        share = macs[i] / total
        penalty += share * (_bit_penalty(genome[2 * i]) + _bit_penalty(genome[2 * i + 1]))
    return min(1.0, max(0.0, SURROGATE_BASE_ACCURACY - penalty))


class _OracleProcess:
    """One child process with a background reader thread."""

    def __init__(self, command: list[str]):
        self.command = command
        self.proc = subprocess.Popen(
            command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=None,  # training logs pass through
            text=True,
            bufsize=1,
        )
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self) -> None:
        assert self.proc.stdout is not None
        for line in self.proc.stdout:
            self._lines.put(line)
        self._lines.put(None)  # EOF marker

    def send(self, line: str) -> None:
        assert self.proc.stdin is not None
        self.proc.stdin.write(line + "\n")
        self.proc.stdin.flush()

    def read_line(self, timeout: float) -> str | None:
        try:
            return self._lines.get(timeout=timeout)
        except queue.Empty:
            raise TimeoutError from None

    def close(self) -> None:
        try:
            if self.proc.stdin is not None:
                self.proc.stdin.close()
            self.proc.terminate()
            self.proc.wait(timeout=5)
        except (OSError, subprocess.TimeoutExpired):
            self.proc.kill()


class ExternalOracle:
    """Client for one external accuracy process; one in-flight request."""

    def __init__(self, command: list[str], epochs: int = 0, timeout_s: float = 300.0):
        self.command = command
        self.epochs = epochs
        self.timeout_s = timeout_s
        self._process: _OracleProcess | None = None
        self._next_id = 0
        self._lock = threading.Lock()

    def _ensure_process(self) -> _OracleProcess:
        if self._process is None or self._process.proc.poll() is not None:
            self._process = _OracleProcess(self.command)
        return self._process

    def _restart(self) -> None:
        if self._process is not None:
            self._process.close()
            self._process = None

    def accuracy(self, genome: Genome, net: NetworkSpec) -> float:
        with self._lock:
            request = AccuracyRequest(self._next_id, net.name, genome, self.epochs)
            self._next_id += 1
            try:
                return self._exchange(request)
            except (TimeoutError, OSError, BrokenPipeError) as exc:
                log.warning("oracle transport failure for request %d (%s); retrying once",
                            request.request_id, exc)
                self._restart()
                try:
                    return self._exchange(request)
                except (TimeoutError, OSError, BrokenPipeError) as exc2:
                    self._restart()
                    raise OracleError(
                        f"request {request.request_id}: transport failed twice: {exc2}"
                    ) from exc2

    __call__ = accuracy

    def _exchange(self, request: AccuracyRequest) -> float:
        process = self._ensure_process()
        process.send(request.to_json_line())
        while True:
            line = process.read_line(self.timeout_s)
            if line is None:
                raise OSError("oracle process closed its response stream")
            line = line.strip()
            if not line:
                continue
            try:
                response = AccuracyResponse.from_json_line(line)
            except json.JSONDecodeError as exc:
                raise OracleError(
                    f"request {request.request_id}: malformed oracle response {line!r}: {exc}"
                ) from None
            if response.request_id != request.request_id:
                log.warning("ignoring response for stale request id %r", response.request_id)
                continue
            if response.status != "ok":
                raise OracleError(
                    f"request {request.request_id}: oracle error: {response.message}"
                )
            if response.top1 is None or not 0.0 <= response.top1 <= 1.0:
                raise OracleError(
                    f"request {request.request_id}: top1 missing or out of range: {response.top1!r}"
                )
            return float(response.top1)

    def close(self) -> None:
        self._restart()

    def __enter__(self) -> "ExternalOracle":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


class OraclePool:
    """Round-robin pool of ExternalOracle workers for parallel evaluation."""

    def __init__(self, command: list[str], size: int, epochs: int = 0, timeout_s: float = 300.0):
        self._workers: queue.Queue[ExternalOracle] = queue.Queue()
        for _ in range(max(1, size)):
            self._workers.put(ExternalOracle(command, epochs=epochs, timeout_s=timeout_s))

    def accuracy(self, genome: Genome, net: NetworkSpec) -> float:
        worker = self._workers.get()
        try:
            return worker.accuracy(genome, net)
        finally:
            self._workers.put(worker)

    __call__ = accuracy

    def close(self) -> None:
        while not self._workers.empty():
            self._workers.get_nowait().close()
