"""Pattern compilation: Thompson NFA, subset construction, Hopcroft minimization.

Byte sets on NFA edges induce a partition of the 256 byte values into
equivalence classes.  Determinization and minimization run over these
classes; the dense per-byte table is only materialized at the end.
"""

from __future__ import annotations

import os
from collections import deque

import numpy as np

from .dfa import Dfa, canonical_order
from .parser import Alt, Anchor, ByteSet, Concat, RegexError, Repeat, parse

DEFAULT_STATE_BUDGET = 100_000
STATE_BUDGET_ENV = "STEEREX_STATE_BUDGET"


class StateBudgetExceeded(RegexError):
    def __init__(self, budget: int, pattern: str = ""):
        self.budget = budget
        super().__init__(f"DFA state budget of {budget} exceeded", pattern, 0)


def default_state_budget() -> int:
    value = os.environ.get(STATE_BUDGET_ENV)
    return int(value) if value else DEFAULT_STATE_BUDGET


class _Nfa:
    """Thompson NFA with epsilon, anchor and byte-set edges."""

    def __init__(self):
        self.eps: list[list[int]] = []
        self.start_anchor: list[list[int]] = []
        self.end_anchor: list[list[int]] = []
        self.edges: list[list[tuple[int, int]]] = []

    def node(self) -> int:
        self.eps.append([])
        self.start_anchor.append([])
        self.end_anchor.append([])
        self.edges.append([])
        return len(self.eps) - 1

    def build(self, ast, src: int, dst: int) -> None:
        """Wire a fragment for ``ast`` between existing nodes ``src`` and ``dst``."""
        if isinstance(ast, ByteSet):
            if ast.mask:
                self.edges[src].append((ast.mask, dst))
        elif isinstance(ast, Concat):
            if not ast.items:
                self.eps[src].append(dst)
                return
            cur = src
            for i, item in enumerate(ast.items):
                nxt = dst if i == len(ast.items) - 1 else self.node()
                self.build(item, cur, nxt)
                cur = nxt
        elif isinstance(ast, Alt):
            for item in ast.items:
                self.build(item, src, dst)
        elif isinstance(ast, Anchor):
            (self.start_anchor if ast.kind == "start" else self.end_anchor)[src].append(dst)
        elif isinstance(ast, Repeat):
            self._repeat(ast, src, dst)
        else:  # pragma: no cover - parser produces only the types above
            raise TypeError(f"unknown AST node {ast!r}")

    def _repeat(self, ast: Repeat, src: int, dst: int) -> None:
        cur = src
        for _ in range(ast.min):
            nxt = self.node()
            self.build(ast.item, cur, nxt)
            cur = nxt
        if ast.max is None:
            # loop node isolates the star so outer epsilons don't leak into it
            loop = self.node()
            self.eps[cur].append(loop)
            body_end = self.node()
            self.build(ast.item, loop, body_end)
            self.eps[body_end].append(loop)
            self.eps[loop].append(dst)
            return
        for _ in range(ast.max - ast.min):
            nxt = self.node()
            self.build(ast.item, cur, nxt)
            self.eps[cur].append(dst)
            cur = nxt
        self.eps[cur].append(dst)

    def closure(self, nodes, at_start: bool, at_end: bool) -> frozenset[int]:
        seen = set(nodes)
        stack = list(nodes)
        while stack:
            n = stack.pop()
            targets = self.eps[n]
            if at_start:
                targets = targets + self.start_anchor[n]
            if at_end:
                targets = targets + self.end_anchor[n]
            for t in targets:
                if t not in seen:
                    seen.add(t)
                    stack.append(t)
        return frozenset(seen)


def byte_classes(masks) -> tuple[list[int], np.ndarray]:
    """Partition 0..255 so every mask is a union of classes.

    Returns the class masks (ordered by smallest member) and a length-256
    array mapping each byte to its class id.
    """
    masks = sorted(set(masks))
    signature_of: dict[tuple, int] = {}
    class_of = np.zeros(256, dtype=np.int32)
    class_masks: list[int] = []
    for b in range(256):
        sig = tuple(m >> b & 1 for m in masks)
        cid = signature_of.get(sig)
        if cid is None:
            cid = signature_of[sig] = len(class_masks)
            class_masks.append(0)
        class_masks[cid] |= 1 << b
        class_of[b] = cid
    return class_masks, class_of


def _determinize(nfa: _Nfa, start: int, accept: int, budget: int, pattern: str):
    masks = [m for edges in nfa.edges for m, _ in edges]
    class_masks, class_of = byte_classes(masks)
    k = len(class_masks)
    classes_in: dict[int, list[int]] = {}
    for m in set(masks):
        classes_in[m] = [c for c, cm in enumerate(class_masks) if cm & m]

    start_set = nfa.closure([start], at_start=True, at_end=False)
    keys = [(start_set, True)]
    index = {keys[0]: 0}
    delta: list[list[int]] = []
    accepting: set[int] = set()
    i = 0
    while i < len(keys):
        nodes, is_start = keys[i]
        if accept in nfa.closure(nodes, at_start=is_start, at_end=True):
            accepting.add(i)
        moves: list[set[int]] = [set() for _ in range(k)]
        for n in nodes:
            for mask, t in nfa.edges[n]:
                for c in classes_in[mask]:
                    moves[c].add(t)
        row = []
        for c in range(k):
            key = (nfa.closure(moves[c], at_start=False, at_end=False), False)
            j = index.get(key)
            if j is None:
                if len(keys) >= budget:
                    raise StateBudgetExceeded(budget, pattern)
                j = index[key] = len(keys)
                keys.append(key)
            row.append(j)
        delta.append(row)
        i += 1
    return delta, accepting, class_masks, class_of


def hopcroft(delta: list[list[int]], accepting: set[int], num_symbols: int) -> list[int]:
    """Return a block id per state for the coarsest language-preserving partition."""
    n = len(delta)
    inverse = [[[] for _ in range(n)] for _ in range(num_symbols)]
    for q, row in enumerate(delta):
        for c, t in enumerate(row):
            inverse[c][t].append(q)

    rejecting = set(range(n)) - accepting
    blocks = [b for b in (set(accepting), rejecting) if b]
    block_of = [0] * n
    for bid, block in enumerate(blocks):
        for q in block:
            block_of[q] = bid

    smaller = min(range(len(blocks)), key=lambda b: len(blocks[b]))
    work = {(smaller, c) for c in range(num_symbols)} if len(blocks) == 2 else set()
    while work:
        splitter, c = work.pop()
        pre = set()
        for t in blocks[splitter]:
            pre.update(inverse[c][t])
        touched: dict[int, set[int]] = {}
        for q in pre:
            touched.setdefault(block_of[q], set()).add(q)
        for bid, inside in touched.items():
            block = blocks[bid]
            if len(inside) == len(block):
                continue
            outside = block - inside
            blocks[bid] = inside
            new_id = len(blocks)
            blocks.append(outside)
            for q in outside:
                block_of[q] = new_id
            small = new_id if len(outside) <= len(inside) else bid
            for sym in range(num_symbols):
                if (bid, sym) in work:
                    work.add((new_id, sym))
                else:
                    work.add((small, sym))
    return block_of


def compile_ast(ast, pattern: str = "", state_budget: int | None = None) -> Dfa:
    budget = default_state_budget() if state_budget is None else state_budget
    nfa = _Nfa()
    start, accept = nfa.node(), nfa.node()
    nfa.build(ast, start, accept)
    delta, accepting, class_masks, class_of = _determinize(nfa, start, accept, budget, pattern)

    block_of = hopcroft(delta, accepting, len(class_masks))
    num_blocks = max(block_of) + 1
    reduced = [[0] * len(class_masks) for _ in range(num_blocks)]
    for q, row in enumerate(delta):
        reduced[block_of[q]] = [block_of[t] for t in row]
    reduced_accepting = {block_of[q] for q in accepting}

    # per-byte view for canonical numbering: bytes ascending within each row
    by_byte = [[row[class_of[b]] for b in range(256)] for row in reduced]
    order = canonical_order(by_byte, block_of[0])
    new_id = {old: new for new, old in enumerate(order)}
    table = np.array([[new_id[t] for t in by_byte[old]] for old in order], dtype=np.int32)
    return Dfa(table, 0, frozenset(new_id[q] for q in reduced_accepting))


def compile_regex(pattern: str, state_budget: int | None = None) -> Dfa:
    """Compile ``pattern`` (full-match semantics, UTF-8 bytes) to a minimal complete DFA.

    Raises RegexSyntaxError, UnsupportedConstruct or StateBudgetExceeded.
    The budget defaults to ``$STEEREX_STATE_BUDGET`` or 100000.
    """
    return compile_ast(parse(pattern), pattern, state_budget)
