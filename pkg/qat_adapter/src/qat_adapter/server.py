"""JSON-lines protocol loop: one request line in, one response line out.

Request:  {"id": 7, "network": "tinycnn", "genome": [8, 8, ...], "epochs": 0}
Response: {"id": 7, "status": "ok", "top1": 0.9}
          {"id": 7, "status": "error", "message": "..."}

Malformed lines get an error response with a null id; the loop never writes
anything but protocol records to stdout and never dies on bad input.
Training logs go to stderr.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import torch

from .data import make_dataset
from .model import GENOME_LENGTH, NETWORK_NAME
from .training import evaluate_genome

log = logging.getLogger(__name__)


class RequestError(ValueError):
    pass


def _parse_request(line: str, default_epochs: int) -> tuple[object, list[int], int]:
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as exc:
        raise RequestError(f"malformed request line: {exc}") from None
    if not isinstance(doc, dict):
        raise RequestError("request must be a JSON object")
    request_id = doc.get("id")
    if doc.get("network") != NETWORK_NAME:
        raise _tagged(request_id, f"unknown network {doc.get('network')!r}")
    genome = doc.get("genome")
    if not isinstance(genome, list) or len(genome) != GENOME_LENGTH:
        raise _tagged(request_id, f"genome must be a list of {GENOME_LENGTH} integers")
    if not all(isinstance(g, int) and 2 <= g <= 8 for g in genome):
        raise _tagged(request_id, "genes must be integers in [2, 8]")
    epochs = doc.get("epochs", default_epochs)
    if not isinstance(epochs, int) or epochs < 0:
        raise _tagged(request_id, "epochs must be a non-negative integer")
    return request_id, genome, epochs


class _TaggedError(RequestError):
    def __init__(self, request_id, message):
        super().__init__(message)
        self.request_id = request_id


def _tagged(request_id, message) -> _TaggedError:
    return _TaggedError(request_id, message)


def serve(
    checkpoint_path: Path,
    start: str = "qat8",
    default_epochs: int = 0,
    seed: int = 0,
    data_seed: int | None = None,
    stdin=None,
    stdout=None,
) -> None:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    checkpoint = torch.load(checkpoint_path, weights_only=True)
    weights = checkpoint["qat8_weights" if start == "qat8" else "fp32_weights"]
    data = make_dataset(checkpoint["seed"] if data_seed is None else data_seed)
    log.info("serving %s from %s (start=%s, stored val_top1=%.4f)",
             NETWORK_NAME, checkpoint_path, start, checkpoint["val_top1"])

    def respond(record: dict) -> None:
        stdout.write(json.dumps(record) + "\n")
        stdout.flush()

    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request_id, genome, epochs = _parse_request(line, default_epochs)
        except _TaggedError as exc:
            respond({"id": exc.request_id, "status": "error", "message": str(exc)})
            continue
        except RequestError as exc:
            respond({"id": None, "status": "error", "message": str(exc)})
            continue
        try:
            top1 = evaluate_genome(weights, genome, data, epochs, seed)
        except Exception as exc:  # stay alive, surface the failure in-band
            log.exception("evaluation failed for request %r", request_id)
            respond({"id": request_id, "status": "error", "message": f"{type(exc).__name__}: {exc}"})
            continue
        respond({"id": request_id, "status": "ok", "top1": top1})
