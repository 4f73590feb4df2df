import functools
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from steerex import assets
from steerex.automaton import compile_regex
from steerex.vocab import Vocabulary, build_index


@functools.lru_cache(maxsize=None)
def compiled(pattern: str):
    return compile_regex(pattern)


@functools.lru_cache(maxsize=None)
def indexed(pattern: str, vocab_name: str):
    return build_index(compiled(pattern), assets.load_vocab(vocab_name))


@pytest.fixture(scope="session")
def char40():
    return assets.load_vocab("char40")


@pytest.fixture(scope="session")
def mixed500():
    return assets.load_vocab("mixed500")


@pytest.fixture
def tiny_vocab():
    # ids: 0 a, 1 b, 2 c, 3 ab, 4 ba, 5 abc, 6 eos
    return Vocabulary.from_strings(["a", "b", "c", "ab", "ba", "abc"])


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number][1])
