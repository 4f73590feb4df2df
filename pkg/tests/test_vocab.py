import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import PlainDfa, brute_valid
from steerex.automaton import compile_regex
from steerex.vocab import (
    ContractViolation,
    Vocabulary,
    build_index,
    escape_token,
    unescape_token,
)


@pytest.fixture
def abac_index():
    dfa = compile_regex("ab|ac")
    vocab = Vocabulary.from_strings(["a", "b", "c", "ab", "bc"])
    return build_index(dfa, vocab)


def test_abac_valid_sets(abac_index):
    idx = abac_index
    dfa = idx.dfa
    q0 = dfa.initial
    mid = dfa.step(q0, ord("a"))
    (acc,) = dfa.accepting
    assert idx.valid_tokens(q0) == [0, 3]  # "a", "ab"
    assert idx.valid_tokens(mid) == [1, 2]  # "b", "c"
    assert idx.valid_tokens(acc) == []
    eos = idx.vocab.eos
    assert idx.mask_vector(acc)[eos] == 0.0
    assert idx.mask_vector(q0)[eos] == -math.inf
    assert idx.mask_vector(mid)[eos] == -math.inf


def test_advance(abac_index):
    idx = abac_index
    q0 = idx.dfa.initial
    mid = idx.advance(q0, 0)
    assert idx.advance(q0, 3) in idx.dfa.accepting
    assert idx.advance(mid, 1) in idx.dfa.accepting
    with pytest.raises(ContractViolation):
        idx.advance(q0, 1)


def test_dead_state_has_no_entry(abac_index):
    (dead,) = abac_index.dfa.dead
    with pytest.raises(ContractViolation):
        abac_index.entry(dead)


def test_mask_from_valid_set():
    # four ids, valid {0, 2}, eos 3, state not accepting
    dfa = compile_regex("(x|z)y")
    vocab = Vocabulary((b"x", b"y", b"z", b""), 3)
    idx = build_index(dfa, vocab)
    assert idx.mask_vector(dfa.initial).tolist() == [0.0, -math.inf, 0.0, -math.inf]


def test_accepting_state_with_all_tokens_valid():
    dfa = compile_regex("[ab]*")
    idx = build_index(dfa, Vocabulary.from_strings(["a", "b", "ab"]))
    assert idx.mask_vector(dfa.initial).tolist() == [0.0, 0.0, 0.0, 0.0]


def test_only_eos_at_finite_language_end():
    dfa = compile_regex("ab")
    idx = build_index(dfa, Vocabulary.from_strings(["a", "b"]))
    acc = dfa.run(dfa.initial, b"ab")
    mask = idx.mask_vector(acc)
    assert mask.tolist() == [-math.inf, -math.inf, 0.0]


def test_universal_language_allows_everything(mixed500):
    dfa = compile_regex(".*")
    idx = build_index(dfa, mixed500)
    expected = [i for i in range(len(mixed500)) if i != mixed500.eos]
    assert idx.valid_tokens(dfa.initial) == expected


def test_token_that_always_dies_is_never_valid():
    dfa = compile_regex("[a-c]+")
    idx = build_index(dfa, Vocabulary.from_strings(["a", "b", "zz", "c"]))
    for entry in idx.entries.values():
        assert 2 not in entry.valid.tolist()


def test_mask_is_read_only(abac_index):
    mask = abac_index.mask_vector(abac_index.dfa.initial)
    with pytest.raises(ValueError):
        mask[0] = 1.0


def test_within_token_path_and_padding(abac_index):
    idx = abac_index
    q0 = idx.dfa.initial
    entry = idx.entry(q0)
    row = entry.valid.tolist().index(3)
    path = idx.within_token_path(q0, 3)
    assert len(path) == 3
    assert entry.lengths[row] == 2
    assert entry.entered[row].tolist() == path[1:]
    short = entry.valid.tolist().index(0)
    assert entry.entered[short].tolist() == [path[1], idx.state_sentinel]
    assert entry.pairs[short, 1] == idx.pair_sentinel


def test_stuck_live_state_is_reported():
    # "aab" is live for the DFA but the vocabulary cannot spell the second "a"
    dfa = compile_regex("ab|aab")
    idx = build_index(dfa, Vocabulary.from_strings(["b", "ab"]))
    mid = dfa.step(dfa.initial, ord("a"))
    assert idx.valid_tokens(mid) == [0, 1]
    assert idx.diagnostics == []
    idx = build_index(compile_regex("xy"), Vocabulary.from_strings(["x"]))
    assert len(idx.diagnostics) == 1


def _oracle_check(pattern, vocab):
    dfa = compile_regex(pattern)
    idx = build_index(dfa, vocab)
    plain = PlainDfa(dfa.to_json())
    assert set(idx.entries) == plain.live
    for q in plain.live:
        assert set(idx.valid_tokens(q)) == brute_valid(plain, vocab.tokens, vocab.eos, q)
        entry = idx.entry(q)
        for w, t in zip(entry.valid.tolist(), entry.targets.tolist()):
            assert plain.star(q, vocab.tokens[w]) == t


@pytest.mark.parametrize("pattern", ["ab|ac", "[a-z]+@[a-z]+\\.(com|org)", "(ab)*c", "[0-9]{2,4}-?[a-f]*"])
def test_index_against_brute_force(pattern, char40, mixed500):
    _oracle_check(pattern, char40)
    _oracle_check(pattern, mixed500)


@settings(max_examples=40, deadline=None)
@given(
    st.sampled_from(["(ab|ba)+", "a*b*c", "(abc|ac)?b+", "[ab]{1,3}c|ca"]),
    st.lists(st.text(alphabet="abcx", min_size=1, max_size=4), min_size=1, max_size=12, unique=True),
)
def test_property_index_matches_brute_force(pattern, tokens):
    _oracle_check(pattern, Vocabulary.from_strings(tokens))


# ---------------------------------------------------------------------------
# vocabulary files
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("token", [b"a", b"\\", b"\t\n", b"\xff\x00", b"\\x41"])
def test_escape_round_trip(token):
    assert unescape_token(escape_token(token)) == token


def test_json_and_tsv_round_trip(tmp_path, mixed500):
    for name in ("v.json", "v.tsv"):
        mixed500.save(tmp_path / name)
        again = Vocabulary.load(tmp_path / name)
        assert again == mixed500
        assert again.digest() == mixed500.digest()


def test_vocabulary_validation():
    with pytest.raises(ValueError):
        Vocabulary((b"a", b""), 0)
    with pytest.raises(ValueError):
        Vocabulary((b"a", b"", b""), 1)
    with pytest.raises(ValueError):
        Vocabulary((), 0)
    with pytest.raises(ValueError):
        Vocabulary.from_tsv("0\ta\n2\t\n")


def test_digest_depends_on_order():
    a = Vocabulary.from_strings(["a", "b"])
    b = Vocabulary.from_strings(["b", "a"])
    assert a.digest() != b.digest()
    # length prefix keeps token boundaries apart
    assert Vocabulary.from_strings(["ab", "c"]).digest() != Vocabulary.from_strings(["a", "bc"]).digest()


def test_decode(tiny_vocab):
    assert tiny_vocab.decode([3, 2, 6]) == b"abc"


def test_index_arrays_are_int64(abac_index):
    for entry in abac_index.entries.values():
        for arr in (entry.valid, entry.targets, entry.pairs, entry.entered):
            assert arr.dtype == np.int64
