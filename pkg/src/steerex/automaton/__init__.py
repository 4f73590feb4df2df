"""Regex to minimal complete DFA over bytes, plus path-tracing primitives."""

from .compile import DEFAULT_STATE_BUDGET, StateBudgetExceeded, compile_regex
from .dfa import ALPHABET_SIZE, Dfa, canonicalize, classify_liveness
from .parser import RegexError, RegexSyntaxError, UnsupportedConstruct, parse

__all__ = [
    "ALPHABET_SIZE",
    "DEFAULT_STATE_BUDGET",
    "Dfa",
    "RegexError",
    "RegexSyntaxError",
    "StateBudgetExceeded",
    "UnsupportedConstruct",
    "canonicalize",
    "classify_liveness",
    "compile_regex",
    "parse",
]
