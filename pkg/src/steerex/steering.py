"""Diversity-steered constrained sampling.

Each step masks the source logits to the DFA's valid tokens.  In ``diverse``
mode it also adds ``gamma * range * reward / penalty``, where the reward
favours tokens whose traversed state bigrams have rarely been taken by
earlier valid samples, and the penalty grows with how often the current
sample has already entered the token's states.

Conventions:

* A token's within-token path is ``dfa.state_path(q, token_bytes)``.  Its
  exploration score is the minimum global count over all consecutive pairs
  in that path, and its loop count is the maximum local count over path
  elements 1..end (the states the token enters).
* Temperature divides the fully adjusted logits, so ``T > 1`` also damps the
  steering term.
* EOS is unmasked only at accepting states and is never rewarded;
  it does take part in the logit range when unmasked.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .automaton import Dfa
from .sources import LogitSource, LogitSourceFault
from .vocab import ContractViolation, VocabularyIndex

MODES = ("baseline", "diverse")
_UNREACHED = np.iinfo(np.int64).max


@dataclass(frozen=True)
class SteeringParams:
    beta: float = 3.0
    gamma: float = 0.5
    temperature: float = 1.0
    max_tokens: int = 18
    mode: str = "diverse"
    # component ablations: reward -> 0, penalty -> 1, range -> 1
    use_reward: bool = True
    use_penalty: bool = True
    use_range: bool = True

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not self.gamma >= 0:
            raise ValueError("gamma must be non-negative")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be at least 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")

    def with_(self, **changes) -> "SteeringParams":
        return replace(self, **changes)


class GlobalTransitionCounter:
    """Run-wide counts of state bigrams taken by valid samples.

    Backed by a dense array over the index's pair ids; the trailing slot is a
    padding sentinel holding the int64 maximum so it never wins a minimum.
    """

    def __init__(self, index: VocabularyIndex):
        self.pair_ids = index.pair_ids
        self.counts = np.zeros(len(self.pair_ids) + 1, dtype=np.int64)
        self.counts[-1] = _UNREACHED
        self.version = 0

    def __getitem__(self, pair: tuple[int, int]) -> int:
        pid = self.pair_ids.get(pair)
        return 0 if pid is None else int(self.counts[pid])

    def __setitem__(self, pair: tuple[int, int], value: int) -> None:
        self.counts[self.pair_ids[pair]] = value
        self.version += 1

    def record(self, path: Sequence[int]) -> None:
        """Increment every consecutive pair of a (valid) sample's state path."""
        for a, b in zip(path, path[1:]):
            self.counts[self.pair_ids[(a, b)]] += 1
        self.version += 1

    def total(self) -> int:
        return int(self.counts[:-1].sum())

    def items(self):
        for pair, pid in self.pair_ids.items():
            if self.counts[pid]:
                yield pair, int(self.counts[pid])

    def to_json(self) -> dict:
        return {"pairs": [[a, b, c] for (a, b), c in sorted(self.items())]}


class LocalStateCounter:
    """Per-sample state entry counts; slot ``num_states`` is a zero pad."""

    def __init__(self, num_states: int):
        self.counts = np.zeros(num_states + 1, dtype=np.int64)
        # item access through a memoryview skips numpy scalar boxing
        self._view = memoryview(self.counts)

    def __getitem__(self, state: int) -> int:
        return int(self.counts[state])

    def __setitem__(self, state: int, value: int) -> None:
        self.counts[state] = value

    def reset(self) -> None:
        self.counts[:] = 0

    def enter(self, states: Sequence[int]) -> None:
        counts = self._view
        for s in states:
            counts[s] += 1


# ---------------------------------------------------------------------------
# Steering terms
# ---------------------------------------------------------------------------


def exploration_score(counter: GlobalTransitionCounter, within_token_path: Sequence[int]) -> int:
    """Smallest global count among the consecutive pairs of the path."""
    if len(within_token_path) < 2:
        raise ValueError("within-token path needs at least two states")
    return min(counter[(a, b)] for a, b in zip(within_token_path, within_token_path[1:]))


def loop_count(local: LocalStateCounter, within_token_path: Sequence[int]) -> int:
    """Largest local count among the states the token enters."""
    return max(local[s] for s in within_token_path[1:])


def _exploration_scores(counter: GlobalTransitionCounter, entry) -> np.ndarray:
    return counter.counts[entry.pairs].min(axis=1)


def _loop_counts(local: LocalStateCounter, entry) -> np.ndarray:
    return local.counts[entry.entered].max(axis=1)


def _valid_rewards(scores: np.ndarray) -> np.ndarray:
    return math.log1p(float(scores.sum())) / (1.0 + scores)


def reward_vector(counter: GlobalTransitionCounter, state: int, index: VocabularyIndex) -> np.ndarray:
    """Exploration reward per vocabulary entry; zero off the valid set."""
    entry = index.entry(state)
    out = np.zeros(len(index.vocab))
    if entry.valid.size:
        out[entry.valid] = _valid_rewards(_exploration_scores(counter, entry))
    return out


def penalty_vector(local: LocalStateCounter, state: int, index: VocabularyIndex, beta: float) -> np.ndarray:
    """``beta * (1 + loop count)`` on valid tokens, 1 elsewhere."""
    entry = index.entry(state)
    out = np.ones(len(index.vocab))
    if entry.valid.size:
        out[entry.valid] = beta * (1.0 + _loop_counts(local, entry))
    return out


def adjust_vector(reward: np.ndarray, penalty: np.ndarray) -> np.ndarray:
    return reward / penalty


def logit_range(z: np.ndarray, state: int, index: VocabularyIndex) -> float:
    """Spread of logits over unmasked entries (eos included where allowed)."""
    ids = index.entry(state).range_ids
    if ids.size == 0:
        raise ContractViolation(f"state {state} has no unmasked token")
    sub = z[ids]
    return float(sub.max() - sub.min())


def _check_logits(z: np.ndarray, size: int) -> None:
    if z.shape != (size,):
        raise LogitSourceFault(f"expected {size} logits, got shape {z.shape}")
    if not math.isfinite(z.sum()) and not np.isfinite(z).all():
        bad = int(np.flatnonzero(~np.isfinite(z))[0])
        raise LogitSourceFault(f"non-finite logit {z[bad]!r} at index {bad}")


def _add_steering(base: np.ndarray, valid: np.ndarray, steer: np.ndarray) -> np.ndarray:
    # skip exact zeros so an inert term leaves the masked logits bit-for-bit intact
    nz = steer != 0.0
    if nz.any():
        base[valid[nz]] += steer[nz]
    return base


def apply_steering(
    z: np.ndarray,
    state: int,
    index: VocabularyIndex,
    counter: GlobalTransitionCounter,
    local: LocalStateCounter,
    params: SteeringParams,
) -> np.ndarray:
    """Masked and steered logits for one step (reference path, no caching)."""
    z = np.asarray(z, dtype=np.float64)
    _check_logits(z, len(index.vocab))
    entry = index.entry(state)
    base = z + entry.mask
    if params.gamma == 0.0 or entry.valid.size == 0:
        return base
    if params.use_reward:
        reward = _valid_rewards(_exploration_scores(counter, entry))
    else:
        reward = np.zeros(entry.valid.size)
    if params.use_penalty:
        penalty = params.beta * (1.0 + _loop_counts(local, entry))
    else:
        penalty = np.ones(entry.valid.size)
    spread = logit_range(z, state, index) if params.use_range else 1.0
    steer = (params.gamma * spread) * (reward / penalty)
    return _add_steering(base, entry.valid, steer)


def sample_token(logits: np.ndarray, temperature: float, rng: np.random.Generator) -> int:
    """Draw from softmax(logits / temperature); ``-inf`` entries are never drawn."""
    top = logits.max()
    if top == -math.inf:
        raise ContractViolation("every token is masked")
    weights = np.exp((logits - top) / temperature)
    cdf = np.cumsum(weights)
    i = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    if i >= cdf.size or weights[i] == 0.0:
        # u * total rounded onto the last plateau: take the last positive entry
        i = int(np.flatnonzero(weights)[-1])
    return i


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------


@dataclass
class SampleOutcome:
    text: bytes
    token_ids: list[int]
    state_path: list[int]
    valid: bool
    steps: int
    step_ms: list[float] = field(default_factory=list)


@dataclass
class RunRecord:
    config: dict
    samples: list[SampleOutcome] = field(default_factory=list)
    counter: GlobalTransitionCounter | None = field(default=None, repr=False, compare=False)

    def valid_texts(self) -> list[bytes]:
        return [s.text for s in self.samples if s.valid]

    @property
    def valid_fraction(self) -> float:
        return sum(s.valid for s in self.samples) / len(self.samples) if self.samples else 0.0


class GenerationFault(RuntimeError):
    def __init__(self, message: str, sample: int, step: int | None, record: RunRecord | None = None):
        self.sample = sample
        self.step = step
        self.record = record
        super().__init__(f"sample {sample}, step {step}: {message}")


@dataclass
class _PathGroups:
    """Valid tokens of one state grouped by identical within-token path."""

    plan: np.ndarray
    mask: np.ndarray
    entered_by_token: dict[int, tuple[int, ...]]


def _path_groups(entry, vocab_size: int, eos: int, state_pad: int) -> _PathGroups:
    if entry.valid.size:
        _, first, inverse = np.unique(entry.pairs, axis=0, return_index=True, return_inverse=True)
        inverse = inverse.reshape(-1)
    else:
        first = np.zeros(0, dtype=np.intp)
        inverse = np.zeros(0, dtype=np.intp)
    lookup = np.full(vocab_size, -1, dtype=np.int64)
    lookup[entry.valid] = inverse
    if entry.eos_allowed:
        lookup[eos] = first.size
    entered_by_token = {
        int(w): tuple(int(s) for s in row if s != state_pad) for w, row in zip(entry.valid, entry.entered)
    }
    plan = _kernels.build_plan(
        vocab_size, lookup, np.bincount(inverse, minlength=first.size), entry.pairs[first], entry.entered[first], entry.range_ids
    )
    return _PathGroups(plan=plan, mask=entry.mask, entered_by_token=entered_by_token)


class _Stepper:
    """Fast per-step logit adjustment for one run.

    Groups each state's tokens by within-token path up front and runs the
    fused kernel in :mod:`steerex._kernels`; the floats match
    :func:`apply_steering`.
    """

    def __init__(self, index: VocabularyIndex, params: SteeringParams, counter: GlobalTransitionCounter):
        self.index = index
        self.params = params
        self.counter = counter
        self.size = len(index.vocab)
        self._groups: dict[int, _PathGroups] = {}
        self._beta = float(params.beta)
        self._gamma = float(params.gamma)
        self._flags = (
            (_kernels.USE_REWARD if params.use_reward else 0)
            | (_kernels.USE_PENALTY if params.use_penalty else 0)
            | (_kernels.USE_RANGE if params.use_range else 0)
        )
        if params.mode == "diverse":
            # setup work stays out of the per-step timings
            _kernels.warm_up()
            for state in index.entries:
                self.groups(state)

    def groups(self, state: int) -> _PathGroups:
        g = self._groups.get(state)
        if g is None:
            g = self._groups[state] = _path_groups(
                self.index.entries[state], self.size, self.index.vocab.eos, self.index.state_sentinel
            )
        return g

    def entered(self, state: int, token: int) -> tuple[int, ...]:
        return self.groups(state).entered_by_token[token]

    def baseline(self, z: np.ndarray, state: int) -> np.ndarray:
        return z + self.index.entries[state].mask

    def diverse(self, z: np.ndarray, state: int, local: LocalStateCounter) -> np.ndarray:
        if self.params.gamma == 0.0:
            return z + self.index.entries[state].mask
        return _kernels.steer(
            z, self._groups[state].plan, self.counter.counts, local.counts, self._beta, self._gamma, self._flags
        )


def generate_sample(
    source: LogitSource,
    dfa: Dfa,
    index: VocabularyIndex,
    counter: GlobalTransitionCounter,
    params: SteeringParams,
    prompt: str,
    rng: np.random.Generator,
    *,
    _stepper: _Stepper | None = None,
    _local: LocalStateCounter | None = None,
    trace: Callable[[int, np.ndarray], None] | None = None,
) -> SampleOutcome:
    """Generate one sample; on a valid finish, fold its state path into ``counter``.

    ``max_tokens`` bounds the number of sampling steps, the terminating EOS
    draw included.  ``trace(step, adjusted_logits)`` is called before each draw.
    """
    stepper = _stepper or _Stepper(index, params, counter)
    local = _local or LocalStateCounter(dfa.num_states)
    local.reset()
    diverse = params.mode == "diverse"
    eos = index.vocab.eos
    tokens_bytes = index.vocab.tokens
    size = len(index.vocab)
    temperature = params.temperature
    entries = index.entries
    clock = time.perf_counter

    q = dfa.initial
    if q not in entries:
        raise ContractViolation("initial state is dead: the pattern matches nothing")
    tokens: list[int] = []
    step_ms: list[float] = []
    valid = False
    for step in range(params.max_tokens):
        t0 = clock()
        try:
            z = source.next_logits(prompt, tokens)
            _check_logits(z, size)
        except LogitSourceFault as exc:
            exc.step = step
            raise
        zp = stepper.diverse(z, q, local) if diverse else stepper.baseline(z, q)
        if trace is not None:
            trace(step, zp)
        w = sample_token(zp, temperature, rng)
        if w == eos:
            step_ms.append((clock() - t0) * 1e3)
            valid = True
            break
        entry = entries[q]
        nxt = entry.next_state.get(w)
        if nxt is None:
            raise ContractViolation(f"sampled token {w} is invalid in state {q}")
        tokens.append(w)
        if diverse:
            local.enter(stepper.entered(q, w))
        q = nxt
        step_ms.append((clock() - t0) * 1e3)

    text = b"".join(tokens_bytes[t] for t in tokens)
    path = dfa.state_path(dfa.initial, text)
    if valid:
        if path[-1] not in dfa.accepting:
            raise ContractViolation("EOS drawn outside an accepting state")
        counter.record(path)
    return SampleOutcome(text, tokens, path, valid, len(step_ms), step_ms)


def sample_rng(seed: int, i: int) -> np.random.Generator:
    """Independent stream for sample ``i`` of a run seeded with ``seed``."""
    return np.random.default_rng([seed, i])


def config_snapshot(params: SteeringParams, **extra) -> dict:
    doc = asdict(params)
    doc.update(extra)
    return doc


def generate_batch(
    source: LogitSource,
    dfa: Dfa,
    index: VocabularyIndex,
    params: SteeringParams,
    prompt: str,
    n: int,
    seed: int,
    *,
    counter: GlobalTransitionCounter | None = None,
    config: dict | None = None,
    on_sample: Callable[[int, SampleOutcome], None] | None = None,
) -> RunRecord:
    """Run ``n`` samples sequentially sharing one global counter.

    ``on_sample`` sees every outcome as soon as it exists (for incremental
    persistence).  A fault raises GenerationFault carrying the partial record.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    counter = counter if counter is not None else GlobalTransitionCounter(index)
    stepper = _Stepper(index, params, counter)
    local = LocalStateCounter(dfa.num_states)
    record = RunRecord(config if config is not None else config_snapshot(params, seed=seed, prompt=prompt))
    for i in range(n):
        try:
            outcome = generate_sample(
                source, dfa, index, counter, params, prompt, sample_rng(seed, i),
                _stepper=stepper, _local=local,
            )
        except (LogitSourceFault, ContractViolation) as exc:
            raise GenerationFault(str(exc), i, getattr(exc, "step", None), record) from exc
        record.samples.append(outcome)
        if on_sample is not None:
            on_sample(i, outcome)
    record.counter = counter
    return record
