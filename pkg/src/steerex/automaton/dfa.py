"""Complete deterministic automata over the byte alphabet."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

ALPHABET_SIZE = 256


@dataclass(frozen=True, eq=False)
class Dfa:
    """A complete DFA with a dense ``(num_states, 256)`` transition table.

    ``live`` holds the states from which some accepting state is reachable;
    ``dead`` is the complement.  Instances are immutable after construction.
    """

    table: np.ndarray
    initial: int
    accepting: frozenset[int]
    live: frozenset[int] = field(default=None)
    dead: frozenset[int] = field(default=None)
    _rows: tuple = field(default=None, repr=False)

    def __post_init__(self):
        table = np.ascontiguousarray(self.table, dtype=np.int32)
        table.setflags(write=False)
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "accepting", frozenset(int(q) for q in self.accepting))
        if self.live is None or self.dead is None:
            live, dead = classify_liveness(table, self.accepting)
            object.__setattr__(self, "live", live)
            object.__setattr__(self, "dead", dead)
        object.__setattr__(self, "_rows", tuple(tuple(int(t) for t in row) for row in table))

    @property
    def num_states(self) -> int:
        return self.table.shape[0]

    @property
    def states(self) -> range:
        return range(self.num_states)

    def step(self, state: int, byte: int) -> int:
        return self._rows[state][byte]

    def run(self, start: int, data: bytes) -> int:
        """Extended transition function: the state reached from ``start`` on ``data``."""
        rows = self._rows
        q = start
        for b in data:
            q = rows[q][b]
        return q

    def state_path(self, start: int, data: bytes) -> list[int]:
        """States visited on ``data``, element 0 being ``start`` itself."""
        rows = self._rows
        path = [start]
        q = start
        for b in data:
            q = rows[q][b]
            path.append(q)
        return path

    def transition_path(self, start: int, data: bytes) -> list[tuple[int, int, int]]:
        path = self.state_path(start, data)
        return [(path[i], data[i], path[i + 1]) for i in range(len(data))]

    def accepts(self, data: bytes) -> bool:
        return self.run(self.initial, data) in self.accepting

    # -- statistics ---------------------------------------------------------

    def transition_counts(self) -> dict[str, int]:
        """Symbol-transition totals under the counting conventions in use.

        ``complete`` is the literal |Q|*256 of the full table.  ``live_source``
        restricts to rows of live states.  ``live_to_live`` further drops
        edges into dead states, which is what a partial (dead-state-free)
        automaton would list.
        """
        live = sorted(self.live)
        live_mask = np.zeros(self.num_states, dtype=bool)
        live_mask[live] = True
        rows = self.table[live]
        return {
            "complete": self.num_states * ALPHABET_SIZE,
            "live_source": len(live) * ALPHABET_SIZE,
            "live_to_live": int(live_mask[rows].sum()) if live else 0,
        }

    def state_bigrams(self, live_source: bool = True) -> set[tuple[int, int]]:
        """Ordered state pairs joined by at least one symbol."""
        sources = sorted(self.live) if live_source else self.states
        return {(q, t) for q in sources for t in set(self._rows[q])}

    # -- serialization ------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "states": self.num_states,
            "initial": self.initial,
            "accepting": sorted(self.accepting),
            "dead": sorted(self.dead),
            "transitions": [list(row) for row in self._rows],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Dfa":
        n = int(doc["states"])
        table = np.asarray(doc["transitions"], dtype=np.int64)
        if table.shape != (n, ALPHABET_SIZE):
            raise ValueError(f"transition table has shape {table.shape}, expected ({n}, 256)")
        if n and (table.min() < 0 or table.max() >= n):
            raise ValueError("transition target out of range")
        dfa = cls(table, int(doc["initial"]), frozenset(doc["accepting"]))
        if "dead" in doc and set(doc["dead"]) != set(dfa.dead):
            raise ValueError("dead set in document disagrees with reachability")
        return dfa

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def classify_liveness(table: np.ndarray, accepting: Iterable[int]) -> tuple[frozenset[int], frozenset[int]]:
    """Split states into (live, dead) by reverse reachability from ``accepting``."""
    n = table.shape[0]
    preds: list[set[int]] = [set() for _ in range(n)]
    for q in range(n):
        for t in set(table[q].tolist()):
            preds[t].add(q)
    live = set(accepting)
    queue = deque(live)
    while queue:
        q = queue.popleft()
        for p in preds[q]:
            if p not in live:
                live.add(p)
                queue.append(p)
    return frozenset(live), frozenset(set(range(n)) - live)


def canonical_order(table: Sequence[Sequence[int]], initial: int) -> list[int]:
    """States in BFS order from ``initial``, ties broken by byte value."""
    order = [initial]
    seen = {initial}
    i = 0
    while i < len(order):
        q = order[i]
        i += 1
        for t in table[q]:
            if t not in seen:
                seen.add(t)
                order.append(t)
    return order


def canonicalize(dfa: Dfa) -> Dfa:
    """Renumber reachable states in canonical BFS order (drops unreachable ones)."""
    order = canonical_order(dfa.table.tolist(), dfa.initial)
    new_id = {old: new for new, old in enumerate(order)}
    table = np.array([[new_id[t] for t in dfa.table[old]] for old in order], dtype=np.int32)
    accepting = frozenset(new_id[q] for q in dfa.accepting if q in new_id)
    return Dfa(table, 0, accepting)
