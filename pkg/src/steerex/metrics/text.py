"""Content diversity: Distinct-n, the weighted-degree kernel with shifts, Vendi."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

DEFAULT_VENDI_CAP = 1000


def decode(sample: bytes | str) -> tuple[str, bool]:
    """Characters of a sample and whether it was valid UTF-8.

    Invalid bytes decode to lone surrogates, which never equal a real
    character, so the sample degrades to byte-level comparison.
    """
    if isinstance(sample, str):
        return sample, True
    try:
        return sample.decode("utf-8"), True
    except UnicodeDecodeError:
        return sample.decode("utf-8", "surrogateescape"), False


def distinct_ngrams(samples: Iterable[bytes | str], n: int) -> tuple[set[str], list[int]]:
    """Set of character n-grams plus indices of samples that were not UTF-8."""
    if n < 1:
        raise ValueError("n must be at least 1")
    grams: set[str] = set()
    flagged = []
    for i, sample in enumerate(samples):
        text, ok = decode(sample)
        if not ok:
            flagged.append(i)
        for j in range(len(text) - n + 1):
            grams.add(text[j : j + n])
    return grams, flagged


def distinct_n(samples: Iterable[bytes | str], n: int) -> int:
    return len(distinct_ngrams(samples, n)[0])


@dataclass(frozen=True)
class KernelParams:
    degree: int = 3
    shift: int = 2

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError("degree must be at least 1")
        if self.shift < 0:
            raise ValueError("shift must be non-negative")

    def substring_weights(self) -> np.ndarray:
        d = self.degree
        k = np.arange(1, d + 1)
        return 2.0 * (d - k + 1) / (d * (d + 1))

    def shift_weights(self) -> np.ndarray:
        return 1.0 / (2.0 * (np.arange(self.shift + 1) + 1))


def _codes(text: str) -> list[int]:
    return [ord(c) for c in text]


def wd_shift_raw(x: Sequence[int], y: Sequence[int], params: KernelParams) -> float:
    """Unnormalized kernel on code-point sequences (direct loops)."""
    betas = params.substring_weights()
    deltas = params.shift_weights()
    total = 0.0
    for k in range(1, params.degree + 1):
        for s in range(params.shift + 1):
            hits = 0
            for i in range(len(y) - k + 1):
                if i + s + k <= len(x) and list(x[i + s : i + s + k]) == list(y[i : i + k]):
                    hits += 1
            if s:
                for i in range(len(x) - k + 1):
                    if i + s + k <= len(y) and list(y[i + s : i + s + k]) == list(x[i : i + k]):
                        hits += 1
            total += betas[k - 1] * deltas[s] * hits
    return total


def wd_shift_kernel(x: bytes | str, y: bytes | str, params: KernelParams = KernelParams()) -> float:
    """Normalized kernel in [0, 1]; empty strings have self-similarity 1."""
    a, b = _codes(decode(x)[0]), _codes(decode(y)[0])
    kxx, kyy = wd_shift_raw(a, a, params), wd_shift_raw(b, b, params)
    if kxx == 0.0 or kyy == 0.0:
        return 1.0 if kxx == kyy == 0.0 else 0.0
    return wd_shift_raw(a, b, params) / math.sqrt(kxx * kyy)


def _shift_match_sums(codes: np.ndarray, rows: slice, s: int, betas: np.ndarray) -> np.ndarray:
    """Weighted k-mer match counts for x shifted by ``s`` against y, for a row block."""
    width = codes.shape[1]
    if s >= width:
        return np.zeros((rows.stop - rows.start, codes.shape[0]))
    xs = codes[rows, s:][:, None, :]
    ys = codes[:, : width - s][None, :, :]
    eq = (xs == ys) & (xs >= 0)
    out = np.zeros(eq.shape[:2])
    run = eq
    for k, beta in enumerate(betas, 1):
        if k > 1:
            if run.shape[2] <= 1:
                break
            run = run[:, :, :-1] & eq[:, :, k - 1 :]
        out += beta * run.sum(axis=2)
    return out


def wd_shift_gram(samples: Sequence[bytes | str], params: KernelParams = KernelParams(), block_elems: int = 20_000_000) -> np.ndarray:
    """Normalized kernel matrix over ``samples`` (vectorized)."""
    texts = [decode(s)[0] for s in samples]
    n = len(texts)
    width = max((len(t) for t in texts), default=0)
    codes = np.full((n, max(width, 1)), -1, dtype=np.int64)
    for i, t in enumerate(texts):
        codes[i, : len(t)] = _codes(t)
    betas = params.substring_weights()
    deltas = params.shift_weights()
    raw = np.zeros((n, n))
    step = max(1, block_elems // max(1, n * max(width, 1)))
    per_shift = [np.zeros((n, n)) for _ in range(params.shift + 1)]
    for start in range(0, n, step):
        rows = slice(start, min(n, start + step))
        for s in range(params.shift + 1):
            per_shift[s][rows] = _shift_match_sums(codes, rows, s, betas)
    raw += deltas[0] * per_shift[0]
    for s in range(1, params.shift + 1):
        raw += deltas[s] * (per_shift[s] + per_shift[s].T)
    diag = np.diag(raw).copy()
    empty = diag == 0.0
    norm = np.sqrt(np.where(empty, 1.0, diag))
    gram = raw / np.outer(norm, norm)
    # empty strings: identical to each other, orthogonal to everything else
    gram[np.ix_(empty, empty)] = 1.0
    return gram


def vendi_from_gram(gram: np.ndarray) -> float:
    n = gram.shape[0]
    eig = np.linalg.eigvalsh(gram / n)
    if eig.min() < -1e-8:
        log.warning("kernel matrix not PSD: smallest eigenvalue %.3g clamped to 0", eig.min())
    eig = eig[eig > 0]
    return float(np.exp(-np.sum(eig * np.log(eig))))


def vendi_score(samples: Sequence[bytes | str], params: KernelParams = KernelParams(), cap: int = DEFAULT_VENDI_CAP) -> float:
    """exp of the eigenvalue entropy of K/n for the normalized kernel matrix."""
    if not 1 <= len(samples) <= cap:
        raise ValueError(f"vendi needs between 1 and {cap} samples, got {len(samples)}")
    return vendi_from_gram(wd_shift_gram(samples, params))
