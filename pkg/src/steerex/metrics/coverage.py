"""Automaton coverage of a sample set."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterable

from ..automaton import Dfa


@dataclass
class CoverageReport:
    state_cov: float
    trans_cov: float
    path_cov: float
    visited_states: int
    visited_symbol_transitions: int
    visited_state_bigrams: int
    denominators: dict

    def to_json(self) -> dict:
        return asdict(self)


def _fraction(num: int, den: int) -> float:
    return num / den if den else 0.0


def visited(dfa: Dfa, samples: Iterable[bytes]):
    """Union of states (q0 included), symbol triples and state bigrams traversed."""
    states: set[int] = set()
    triples: set[tuple[int, int, int]] = set()
    bigrams: set[tuple[int, int]] = set()
    for text in samples:
        path = dfa.state_path(dfa.initial, text)
        states.update(path)
        for i, b in enumerate(text):
            triples.add((path[i], b, path[i + 1]))
            bigrams.add((path[i], path[i + 1]))
    return states, triples, bigrams


def denominators(dfa: Dfa) -> dict:
    counts = dfa.transition_counts()
    return {
        "states": dfa.num_states,
        "live_states": len(dfa.live),
        "symbol_transitions": counts["live_to_live"],
        "symbol_transitions_live_source": counts["live_source"],
        "symbol_transitions_complete": counts["complete"],
        "state_bigrams": len(dfa.state_bigrams(live_source=True)),
    }


def state_coverage(dfa: Dfa, samples: Iterable[bytes]) -> float:
    """Visited states over all states (dead state included); 0 for no samples."""
    samples = list(samples)
    if not samples:
        return 0.0
    states, _, _ = visited(dfa, samples)
    return _fraction(len(states), dfa.num_states)


def transition_coverage(dfa: Dfa, samples: Iterable[bytes]) -> float:
    """Visited (q, byte, q') triples over the live-to-live symbol transitions."""
    _, triples, _ = visited(dfa, samples)
    return _fraction(len(triples), dfa.transition_counts()["live_to_live"])


def path_coverage(dfa: Dfa, samples: Iterable[bytes]) -> float:
    """Visited state bigrams over all bigrams leaving live states."""
    _, _, bigrams = visited(dfa, samples)
    return _fraction(len(bigrams), len(dfa.state_bigrams(live_source=True)))


def coverage_report(dfa: Dfa, samples: Iterable[bytes]) -> CoverageReport:
    samples = list(samples)
    states, triples, bigrams = visited(dfa, samples)
    dens = denominators(dfa)
    return CoverageReport(
        state_cov=_fraction(len(states), dens["states"]),
        trans_cov=_fraction(len(triples), dens["symbol_transitions"]),
        path_cov=_fraction(len(bigrams), dens["state_bigrams"]),
        visited_states=len(states),
        visited_symbol_transitions=len(triples),
        visited_state_bigrams=len(bigrams),
        denominators=dens,
    )


def live_state_coverage(dfa: Dfa, samples: Iterable[bytes]) -> float:
    """Fraction of live states visited."""
    states, _, _ = visited(dfa, samples)
    return _fraction(len(states & dfa.live), len(dfa.live))


__all__ = [
    "CoverageReport",
    "coverage_report",
    "denominators",
    "live_state_coverage",
    "path_coverage",
    "state_coverage",
    "transition_coverage",
    "visited",
]
