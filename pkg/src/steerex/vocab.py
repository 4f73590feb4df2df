"""Token vocabularies and their alignment with a DFA.

A vocabulary is an ordered list of byte strings; the end-of-sequence token is
the one empty entry.  :func:`build_index` walks a byte trie of the vocabulary
from every live state once, recording for each valid (state, token) pair the
target state and the states traversed inside the token.  The steering code
reads those traversals as padded integer arrays so per-step bookkeeping is a
handful of vectorized gathers.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .automaton import Dfa

log = logging.getLogger(__name__)

NEG_INF = float("-inf")


class ContractViolation(RuntimeError):
    """A caller broke a precondition that generation relies on."""


# ---------------------------------------------------------------------------
# Vocabulary
# ---------------------------------------------------------------------------

_ESCAPE_RE = re.compile(rb"\\(x[0-9a-fA-F]{2}|\\)")


def escape_token(token: bytes) -> str:
    """Printable form: backslash and non-printable / non-ASCII bytes as ``\\xNN``."""
    out = []
    for b in token:
        if b == 0x5C:
            out.append("\\\\")
        elif 0x20 <= b < 0x7F:
            out.append(chr(b))
        else:
            out.append(f"\\x{b:02x}")
    return "".join(out)


def unescape_token(text: str) -> bytes:
    raw = text.encode("utf-8")

    def repl(m: re.Match) -> bytes:
        body = m.group(1)
        return b"\\" if body == b"\\" else bytes([int(body[1:], 16)])

    return _ESCAPE_RE.sub(repl, raw)


@dataclass(frozen=True)
class Vocabulary:
    tokens: tuple[bytes, ...]
    eos: int

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(bytes(t) for t in self.tokens))
        if not self.tokens:
            raise ValueError("vocabulary is empty")
        if not 0 <= self.eos < len(self.tokens):
            raise ValueError(f"eos id {self.eos} out of range")
        if self.tokens[self.eos] != b"":
            raise ValueError("eos token must be the empty byte string")
        empties = [i for i, t in enumerate(self.tokens) if not t and i != self.eos]
        if empties:
            raise ValueError(f"empty non-eos tokens at ids {empties}")

    def __len__(self) -> int:
        return len(self.tokens)

    @classmethod
    def from_strings(cls, tokens, eos: int | None = None) -> "Vocabulary":
        """Build from str/bytes tokens; appends an eos entry when ``eos`` is None."""
        encoded = [t.encode("utf-8") if isinstance(t, str) else bytes(t) for t in tokens]
        if eos is None:
            encoded.append(b"")
            eos = len(encoded) - 1
        return cls(tuple(encoded), eos)

    def digest(self) -> str:
        """SHA-256 over the length-prefixed (4-byte big-endian) tokens in id order."""
        h = hashlib.sha256()
        for t in self.tokens:
            h.update(len(t).to_bytes(4, "big"))
            h.update(t)
        return h.hexdigest()

    def decode(self, token_ids) -> bytes:
        return b"".join(self.tokens[i] for i in token_ids)

    # -- files --------------------------------------------------------------

    def to_json(self) -> list:
        return [{"eos": self.eos}] + [escape_token(t) for t in self.tokens]

    @classmethod
    def from_json(cls, doc) -> "Vocabulary":
        if not isinstance(doc, list) or not doc or not isinstance(doc[0], dict):
            raise ValueError("vocabulary JSON must be an array starting with an {\"eos\": id} header")
        tokens = tuple(unescape_token(t) for t in doc[1:])
        return cls(tokens, int(doc[0]["eos"]))

    @classmethod
    def from_tsv(cls, text: str) -> "Vocabulary":
        rows: dict[int, bytes] = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            ident, sep, token = line.partition("\t")
            if not sep:
                raise ValueError(f"line {lineno}: expected 'id<TAB>token'")
            rows[int(ident)] = unescape_token(token)
        if sorted(rows) != list(range(len(rows))):
            raise ValueError("token ids must be dense from 0")
        tokens = tuple(rows[i] for i in range(len(rows)))
        eos = [i for i, t in enumerate(tokens) if not t]
        if len(eos) != 1:
            raise ValueError("TSV vocabulary needs exactly one empty (eos) token")
        return cls(tokens, eos[0])

    def to_tsv(self) -> str:
        return "".join(f"{i}\t{escape_token(t)}\n" for i, t in enumerate(self.tokens))

    @classmethod
    def load(cls, path) -> "Vocabulary":
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        if path.suffix.lower() == ".tsv":
            return cls.from_tsv(text)
        return cls.from_json(json.loads(text))

    def save(self, path) -> None:
        path = Path(path)
        if path.suffix.lower() == ".tsv":
            path.write_text(self.to_tsv(), encoding="utf-8")
        else:
            path.write_text(json.dumps(self.to_json(), indent=0) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Index
# ---------------------------------------------------------------------------


@dataclass
class StateEntry:
    """Per-live-state view of the vocabulary.

    ``pairs[i]`` and ``entered[i]`` hold, for valid token ``valid[i]``, the
    state-bigram ids and the entered state ids along its within-token path,
    right-padded with the index's sentinels.
    """

    valid: np.ndarray
    targets: np.ndarray
    next_state: dict[int, int]
    mask: np.ndarray
    eos_allowed: bool
    pairs: np.ndarray
    entered: np.ndarray
    lengths: np.ndarray
    range_ids: np.ndarray = field(repr=False, default=None)


class _TrieNode:
    __slots__ = ("children", "token")

    def __init__(self):
        self.children: dict[int, _TrieNode] = {}
        self.token = -1


def _build_trie(vocab: Vocabulary) -> _TrieNode:
    root = _TrieNode()
    for tid, tok in enumerate(vocab.tokens):
        if tid == vocab.eos:
            continue
        node = root
        for b in tok:
            node = node.children.setdefault(b, _TrieNode())
        node.token = tid
    return root


@dataclass
class VocabularyIndex:
    dfa: Dfa
    vocab: Vocabulary
    entries: dict[int, StateEntry]
    pair_ids: dict[tuple[int, int], int]
    diagnostics: list[str]

    @property
    def pair_sentinel(self) -> int:
        """Index of the padding slot in pair-count arrays (holds +inf for minima)."""
        return len(self.pair_ids)

    @property
    def state_sentinel(self) -> int:
        """Index of the padding slot in state-count arrays (holds 0 for maxima)."""
        return self.dfa.num_states

    def entry(self, state: int) -> StateEntry:
        try:
            return self.entries[state]
        except KeyError:
            raise ContractViolation(f"state {state} is dead; generation must never reach it") from None

    def valid_tokens(self, state: int) -> list[int]:
        return self.entry(state).valid.tolist()

    def mask_vector(self, state: int) -> np.ndarray:
        return self.entry(state).mask

    def advance(self, state: int, token: int) -> int:
        nxt = self.entry(state).next_state.get(token)
        if nxt is None:
            raise ContractViolation(f"token {token} is not valid in state {state}")
        return nxt

    def within_token_path(self, state: int, token: int) -> list[int]:
        return self.dfa.state_path(state, self.vocab.tokens[token])


def build_index(dfa: Dfa, vocab: Vocabulary) -> VocabularyIndex:
    """Precompute valid tokens, targets, masks and within-token paths per live state."""
    vocab_size = len(vocab)
    live = dfa.live
    pair_ids: dict[tuple[int, int], int] = {}
    for q in sorted(live):
        for t in sorted(set(dfa.table[q].tolist())):
            pair_ids[(q, t)] = len(pair_ids)
    pair_pad = len(pair_ids)
    state_pad = dfa.num_states

    root = _build_trie(vocab)
    rows = dfa.table.tolist()
    entries: dict[int, StateEntry] = {}
    diagnostics: list[str] = []

    for q in sorted(live):
        found: list[tuple[int, list[int]]] = []
        # iterative DFS carrying the within-token state path
        stack = [(root, [q])]
        while stack:
            node, path = stack.pop()
            if node.token >= 0 and len(path) > 1:
                found.append((node.token, path))
            here = path[-1]
            for b, child in node.children.items():
                t = rows[here][b]
                if t in live:
                    stack.append((child, path + [t]))
        found.sort()
        k = len(found)
        width = max((len(p) - 1 for _, p in found), default=1)
        pairs = np.full((k, width), pair_pad, dtype=np.int64)
        entered = np.full((k, width), state_pad, dtype=np.int64)
        lengths = np.zeros(k, dtype=np.int64)
        for i, (_, path) in enumerate(found):
            n = len(path) - 1
            lengths[i] = n
            pairs[i, :n] = [pair_ids[(path[j], path[j + 1])] for j in range(n)]
            entered[i, :n] = path[1:]
        valid = np.array([tid for tid, _ in found], dtype=np.int64)
        targets = np.array([p[-1] for _, p in found], dtype=np.int64)
        eos_allowed = q in dfa.accepting
        mask = np.full(vocab_size, NEG_INF)
        mask[valid] = 0.0
        if eos_allowed:
            mask[vocab.eos] = 0.0
        mask.setflags(write=False)
        range_ids = np.append(valid, vocab.eos) if eos_allowed else valid
        if k == 0 and not eos_allowed:
            msg = f"state {q} is live but no token can leave it toward acceptance"
            diagnostics.append(msg)
            log.warning(msg)
        entries[q] = StateEntry(
            valid=valid,
            targets=targets,
            next_state=dict(zip(valid.tolist(), targets.tolist())),
            mask=mask,
            eos_allowed=eos_allowed,
            pairs=pairs,
            entered=entered,
            lengths=lengths,
            range_ids=range_ids,
        )
    return VocabularyIndex(dfa, vocab, entries, pair_ids, diagnostics)
