"""Memoization of per-layer mapper results.

A cache key digests everything the result depends on: the architecture
hash, the layer's shape (not its name, so duplicate layers share entries),
the three bit-widths, and the full mapper configuration including its seed.
Entries therefore reproduce bit-exactly by re-running the mapper, and
enabling or disabling the cache can never change a result, only runtime.

Persistent entries are one small JSON file each under the cache directory,
written to a temp name and atomically renamed; the first writer wins and a
corrupted file is treated as a miss with a warning.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import threading
from pathlib import Path

from .arch import ArchitectureSpec, canonical_hash
from .mapspace import MapperConfig
from .workload import LayerWorkload, TensorBits

log = logging.getLogger(__name__)

ENV_CACHE_DIR = "QMAP_CACHE_DIR"


def default_cache_dir() -> Path:
    env = os.environ.get(ENV_CACHE_DIR)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "qmap"


def cache_key(
    arch: ArchitectureSpec, layer: LayerWorkload, bits: TensorBits, mapper: MapperConfig
) -> str:
    payload = {
        "arch": canonical_hash(arch),
        "layer": layer.canonical_dict(),
        "bits": bits.as_tuple(),
        "mapper": mapper.canonical_dict(),
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.blake2b(blob.encode("utf-8"), digest_size=16).hexdigest()


class ResultCache:
    """Two-tier (memory + optional directory) key -> JSON record store."""

    def __init__(self, directory: Path | str | None = None, max_bytes: int | None = None):
        self.directory = Path(directory) if directory is not None else None
        self.max_bytes = max_bytes
        self._memory: dict[str, dict] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        assert self.directory is not None
        return self.directory / key[:2] / f"{key}.json"

    def get(self, key: str) -> dict | None:
        with self._lock:
            if key in self._memory:
                self.hits += 1
                return self._memory[key]
        record = None
        if self.directory is not None:
            path = self._path(key)
            if path.exists():
                try:
                    record = json.loads(path.read_text())
                except (OSError, json.JSONDecodeError) as exc:
                    log.warning("discarding corrupted cache entry %s: %s", path, exc)
                    record = None
        with self._lock:
            if record is not None:
                self._memory[key] = record
                self.hits += 1
            else:
                self.misses += 1
        return record

    def put(self, key: str, record: dict) -> None:
        with self._lock:
            self._memory.setdefault(key, record)
        if self.directory is None:
            return
        path = self._path(key)
        if path.exists():
            return  # first writer wins
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
            with os.fdopen(fd, "w") as handle:
                json.dump(record, handle)
            if path.exists():
                os.unlink(tmp)
            else:
                os.replace(tmp, path)
        except OSError as exc:
            log.warning("cache persistence failed for %s (memory-only from here): %s", path, exc)
            return
        if self.max_bytes is not None:
            self._prune()

    def _prune(self) -> None:
        assert self.directory is not None
        entries = sorted(self.directory.glob("*/*.json"), key=lambda p: p.stat().st_mtime)
        total = sum(p.stat().st_size for p in entries)
        while entries and total > self.max_bytes:
            oldest = entries.pop(0)
            try:
                total -= oldest.stat().st_size
                oldest.unlink()
            except OSError:
                break
