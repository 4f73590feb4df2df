"""Full evaluation reports and efficiency figures for run records."""

from __future__ import annotations

import csv
import io
import logging

from ..automaton import Dfa
from ..steering import RunRecord
from .coverage import coverage_report, denominators
from .text import DEFAULT_VENDI_CAP, KernelParams, decode, distinct_ngrams, vendi_score

log = logging.getLogger(__name__)

NOTES = [
    "state_cov counts the initial state as visited",
    "trans_cov denominator counts live-to-live (q, byte, q') triples; "
    "see denominators for the live-source and complete-table alternatives",
    "path_cov denominator counts state bigrams leaving live states, dead targets included",
    "metrics use valid samples only",
]

CSV_COLUMNS = [
    "label", "state_cov", "trans_cov", "path_cov",
    "avg_length", "distinct_2", "distinct_3", "vendi", "valid_fraction", "tps",
]


def tokens_per_second(record: RunRecord) -> float:
    """Sampled tokens (EOS draws included) per second of per-step wall time."""
    steps = sum(s.steps for s in record.samples)
    seconds = sum(sum(s.step_ms) for s in record.samples) / 1e3
    return steps / seconds if seconds > 0 else 0.0


def efficiency(record: RunRecord, baseline: RunRecord | None = None) -> dict:
    tps = tokens_per_second(record)
    out = {"tps": tps}
    if baseline is not None:
        base = tokens_per_second(baseline)
        out["baseline_tps"] = base
        out["percentage"] = 100.0 * tps / base if base > 0 else 0.0
    return out


def evaluate(record: RunRecord, dfa: Dfa, kernel: KernelParams = KernelParams(), vendi_cap: int = DEFAULT_VENDI_CAP) -> dict:
    texts = record.valid_texts()
    notes = list(NOTES)
    cov = coverage_report(dfa, texts)
    grams2, flagged = distinct_ngrams(texts, 2)
    grams3, _ = distinct_ngrams(texts, 3)
    if flagged:
        notes.append(f"{len(flagged)} samples are not valid UTF-8; n-grams taken over surrogate-escaped bytes")
    if not record.samples:
        log.warning("record has no samples; reporting zeros")
        notes.append("empty record")
    if texts:
        scored = texts[:vendi_cap]
        if len(texts) > vendi_cap:
            notes.append(f"vendi computed on the first {vendi_cap} of {len(texts)} valid samples")
        vendi = vendi_score(scored, kernel, cap=vendi_cap)
        avg_length = sum(len(decode(t)[0]) for t in texts) / len(texts)
    else:
        vendi = 0.0
        avg_length = 0.0
    return {
        "state_cov": cov.state_cov,
        "trans_cov": cov.trans_cov,
        "path_cov": cov.path_cov,
        "distinct_2": len(grams2),
        "distinct_3": len(grams3),
        "vendi": vendi,
        "avg_length": avg_length,
        "valid_fraction": record.valid_fraction,
        "tps": tokens_per_second(record),
        "visited": {
            "states": cov.visited_states,
            "symbol_transitions": cov.visited_symbol_transitions,
            "state_bigrams": cov.visited_state_bigrams,
        },
        "denominators": denominators(dfa),
        "kernel": {"degree": kernel.degree, "shift": kernel.shift},
        "notes": notes,
    }


def csv_rows(reports: dict[str, dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for label, rep in reports.items():
        writer.writerow([label] + [_fmt(rep[c]) for c in CSV_COLUMNS[1:]])
    return buf.getvalue()


def _fmt(value) -> str:
    return f"{value:.6g}" if isinstance(value, float) else str(value)


COMPARE_FIELDS = [
    ("state_cov", "StateCov"),
    ("trans_cov", "TransCov"),
    ("path_cov", "PathCov"),
    ("avg_length", "Average length"),
    ("distinct_2", "Distinct-2"),
    ("distinct_3", "Distinct-3"),
    ("vendi", "Vendi"),
    ("valid_fraction", "Valid fraction"),
    ("tps", "TPS"),
]


def compare_table(a: dict, b: dict, label_a: str = "A", label_b: str = "B") -> str:
    rows = [("metric", label_a, label_b, "delta")]
    for key, name in COMPARE_FIELDS:
        rows.append((name, _fmt(a[key]), _fmt(b[key]), _fmt(b[key] - a[key])))
    pct = 100.0 * b["tps"] / a["tps"] if a["tps"] else 0.0
    rows.append((f"TPS {label_b}/{label_a}", "", "", f"{pct:.2f}%"))
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    lines = ["  ".join(cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(r, widths))) for r in rows]
    return "\n".join(lines) + "\n"
