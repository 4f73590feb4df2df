"""Logit sources: where next-token scores come from.

Sources see only the prompt and the generated token ids.  Masking and
steering are applied by the engine afterwards, so a source never observes
automaton state or counters.

Remote wire protocol (JSON over HTTP)::

    GET  /vocab_hash  -> {"hash": "<sha256 hex>"}
    POST /logits      {"prompt": str, "tokens": [int]} -> {"logits": [float * |V|]}
"""

from __future__ import annotations

import json
import socket
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np


class LogitSourceFault(RuntimeError):
    """The source failed to produce a usable logit vector."""

    step: int | None = None


class ProtocolFault(LogitSourceFault):
    pass


class SourceTimeout(LogitSourceFault):
    pass


class VocabMismatch(LogitSourceFault):
    def __init__(self, local: str, remote: str):
        self.local = local
        self.remote = remote
        super().__init__(f"vocabulary hash mismatch: local {local}, server {remote}")


class LogitSource:
    """Interface: ``next_logits`` returns a length-``vocab_size`` float vector."""

    vocab_size: int

    def next_logits(self, prompt: str, tokens: Sequence[int]) -> np.ndarray:
        raise NotImplementedError


class UniformSource(LogitSource):
    def __init__(self, size: int):
        if size < 1:
            raise ValueError("vocabulary size must be at least 1")
        self.vocab_size = size
        self._zeros = np.zeros(size)
        self._zeros.setflags(write=False)

    def next_logits(self, prompt, tokens):
        return self._zeros


def _as_row(values, size: int, label: str) -> np.ndarray:
    row = np.asarray(values, dtype=np.float64)
    if row.shape != (size,):
        raise ValueError(f"{label}: expected {size} logits, got shape {row.shape}")
    row = row.copy()
    row.setflags(write=False)
    return row


class TableSource(LogitSource):
    """Logits keyed on the most recent token id; ``default`` covers the first step
    and any token without its own row."""

    def __init__(self, default, rows: Mapping[int, Sequence[float]] | None = None):
        default = np.asarray(default, dtype=np.float64)
        self.vocab_size = int(default.shape[0]) if default.ndim == 1 else 0
        if self.vocab_size < 1:
            raise ValueError("default row must be a non-empty vector")
        self.default = _as_row(default, self.vocab_size, "default row")
        self.rows = {int(k): _as_row(v, self.vocab_size, f"row {k}") for k, v in (rows or {}).items()}

    def next_logits(self, prompt, tokens):
        if not tokens:
            return self.default
        return self.rows.get(tokens[-1], self.default)

    @classmethod
    def random(cls, size: int, seed: int, scale: float = 3.0, eos: int | None = None, eos_bias: float = 0.0) -> "TableSource":
        """Gaussian rows (std ``scale``) for every token id: a sharply biased mock model.

        ``eos_bias`` is added to column ``eos`` of every row, which models a
        source that tends to end its output once the grammar allows it.
        """
        rng = np.random.default_rng(seed)
        table = rng.normal(0.0, scale, size=(size + 1, size))
        if eos is not None:
            table[:, eos] += eos_bias
        return cls(table[0], {i: table[i + 1] for i in range(size)})

    def to_json(self) -> dict:
        return {
            "default": self.default.tolist(),
            "rows": {str(k): v.tolist() for k, v in sorted(self.rows.items())},
        }

    @classmethod
    def from_json(cls, doc: dict) -> "TableSource":
        return cls(doc["default"], {int(k): v for k, v in doc.get("rows", {}).items()})

    @classmethod
    def load(cls, path) -> "TableSource":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class RemoteSourceConfig:
    endpoint: str
    timeout: float = 30.0
    retries: int = 2
    auth_header: str | None = None  # "Name: value"

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.retries < 0:
            raise ValueError("retries must be non-negative")


class RemoteSource(LogitSource):
    def __init__(self, config: RemoteSourceConfig, vocab_hash: str, vocab_size: int):
        self.config = config
        self.vocab_size = vocab_size
        self._base = config.endpoint.rstrip("/")
        doc = self._request("GET", "/vocab_hash")
        remote = doc.get("hash") if isinstance(doc, dict) else None
        if remote != vocab_hash:
            raise VocabMismatch(vocab_hash, str(remote))

    def _request(self, method: str, path: str, body: dict | None = None):
        data = json.dumps(body).encode() if body is not None else None
        headers = {"Content-Type": "application/json"}
        if self.config.auth_header:
            name, _, value = self.config.auth_header.partition(":")
            headers[name.strip()] = value.strip()
        last: Exception | None = None
        for attempt in range(self.config.retries + 1):
            req = urllib.request.Request(self._base + path, data=data, headers=headers, method=method)
            try:
                with urllib.request.urlopen(req, timeout=self.config.timeout) as resp:
                    payload = resp.read()
                break
            except (socket.timeout, TimeoutError, urllib.error.URLError, ConnectionError) as exc:
                if isinstance(exc, urllib.error.HTTPError):
                    raise ProtocolFault(f"{method} {path}: HTTP {exc.code}") from exc
                last = exc
                time.sleep(min(0.05 * 2**attempt, 1.0))
        else:
            raise SourceTimeout(
                f"{method} {path}: no response after {self.config.retries + 1} attempts ({last})"
            )
        try:
            return json.loads(payload)
        except ValueError:
            raise ProtocolFault(f"{method} {path}: malformed JSON: {payload[:120]!r}") from None

    def next_logits(self, prompt, tokens):
        doc = self._request("POST", "/logits", {"prompt": prompt, "tokens": list(map(int, tokens))})
        logits = doc.get("logits") if isinstance(doc, dict) else None
        if not isinstance(logits, list):
            raise ProtocolFault(f"response lacks a logits array: {json.dumps(doc)[:120]}")
        if len(logits) != self.vocab_size:
            raise ProtocolFault(f"expected {self.vocab_size} logits, got {len(logits)}")
        try:
            row = np.array(logits, dtype=np.float64)
        except (TypeError, ValueError):
            raise ProtocolFault(f"non-numeric logits: {json.dumps(logits)[:120]}") from None
        if not np.isfinite(row).all():
            bad = int(np.flatnonzero(~np.isfinite(row))[0])
            raise ProtocolFault(f"non-finite logit at index {bad}: {logits[bad]!r}")
        return row


def parse_source(spec: str, vocab_size: int, vocab_hash: str, **remote_options) -> LogitSource:
    """Resolve ``uniform``, ``table:PATH`` or ``remote:URL``."""
    kind, _, arg = spec.partition(":")
    if kind == "uniform" and not arg:
        return UniformSource(vocab_size)
    if kind == "table" and arg:
        source = TableSource.load(arg)
        if source.vocab_size != vocab_size:
            raise ValueError(f"table has {source.vocab_size} columns, vocabulary has {vocab_size}")
        return source
    if kind == "remote" and arg:
        return RemoteSource(RemoteSourceConfig(arg, **remote_options), vocab_hash, vocab_size)
    raise ValueError(f"unknown source spec {spec!r}; use uniform, table:PATH or remote:URL")

