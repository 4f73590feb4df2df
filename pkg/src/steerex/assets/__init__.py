"""Bundled grammars and mock vocabularies.

Grammars: ``email``, ``json`` and ``bomb`` are the appendix patterns (email
with its LaTeX-dropped ``%`` run restored); ``color`` is a simplified CSS
color pattern covering hex, rgb(a), hsl(a) and a few named colors.
"""

from __future__ import annotations

import json
from importlib import resources

GRAMMARS = ("email", "json", "bomb", "color")
VOCABS = ("char40", "mixed500")
BUILTIN_PREFIX = "builtin:"


def _root():
    return resources.files(__name__)


def grammar(name: str) -> str:
    if name not in GRAMMARS:
        raise KeyError(f"unknown grammar {name!r}; choose from {GRAMMARS}")
    return (_root() / "grammars" / f"{name}.regex").read_text(encoding="utf-8").rstrip("\n")


def vocab_path(name: str):
    if name not in VOCABS:
        raise KeyError(f"unknown vocabulary {name!r}; choose from {VOCABS}")
    return _root() / "vocab" / f"{name}.json"


def load_vocab(name: str):
    from ..vocab import Vocabulary

    return Vocabulary.from_json(json.loads(vocab_path(name).read_text(encoding="utf-8")))
