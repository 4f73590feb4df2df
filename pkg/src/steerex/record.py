"""JSON-lines persistence for run records.

Line 1 is the config snapshot ``{"kind": "header", ...}``; every further
line is one sample ``{"i", "text", "tokens", "valid", "steps", "ms"}``.
Sample text is the UTF-8 decoding of the generated bytes, with undecodable
bytes carried as surrogate escapes (``\\udcNN``) so the bytes round-trip.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import IO

from .steering import RunRecord, SampleOutcome

TIMING_FIELDS = ("ms",)


def pattern_digest(pattern: str) -> str:
    return hashlib.sha256(pattern.encode("utf-8")).hexdigest()


def text_field(data: bytes) -> str:
    return data.decode("utf-8", "surrogateescape")


def sample_line(i: int, outcome: SampleOutcome) -> dict:
    return {
        "i": i,
        "text": text_field(outcome.text),
        "tokens": outcome.token_ids,
        "valid": outcome.valid,
        "steps": outcome.steps,
        "ms": [round(t, 6) for t in outcome.step_ms],
    }


class RecordWriter:
    """Streams a record to disk so partial runs survive faults."""

    def __init__(self, fh: IO[str], config: dict):
        self.fh = fh
        self.fh.write(json.dumps({"kind": "header", **config}) + "\n")
        self.fh.flush()

    def write(self, i: int, outcome: SampleOutcome) -> None:
        self.fh.write(json.dumps(sample_line(i, outcome)) + "\n")
        self.fh.flush()


def save_record(record: RunRecord, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        writer = RecordWriter(fh, record.config)
        for i, s in enumerate(record.samples):
            writer.write(i, s)


def load_record(path) -> RunRecord:
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty record file")
    header = json.loads(lines[0])
    if header.pop("kind", None) != "header":
        raise ValueError(f"{path}: first line is not a header")
    samples = []
    for ln in lines[1:]:
        doc = json.loads(ln)
        samples.append(
            SampleOutcome(
                text=doc["text"].encode("utf-8", "surrogateescape"),
                token_ids=list(doc["tokens"]),
                state_path=[],
                valid=bool(doc["valid"]),
                steps=int(doc["steps"]),
                step_ms=list(doc.get("ms", [])),
            )
        )
    return RunRecord(header, samples)


def strip_timing(line: str) -> str:
    """A record line with timing fields removed, for determinism comparisons."""
    doc = json.loads(line)
    for key in TIMING_FIELDS:
        doc.pop(key, None)
    return json.dumps(doc, sort_keys=True)
