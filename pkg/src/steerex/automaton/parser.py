"""Regex parser for the byte-level dialect.

The parser turns pattern text into a small AST whose leaves are byte sets
(256-bit integer masks).  Literal characters outside ASCII are lowered to the
byte sequence of their UTF-8 encoding, so every construct downstream works on
bytes only.

Supported: literals, ``.`` (any byte, newline included), character classes with ranges and negation,
``\\xNN``/octal/control escapes, ``\\d \\w \\s`` and their negations,
alternation, capturing / non-capturing / named groups, ``* + ? {m} {m,}
{m,n} {,n}`` with optional lazy suffix, ``^ $ \\A \\Z`` anchors.

Rejected as unsupported: backreferences, lookaround, word boundaries,
inline flags, conditionals, possessive quantifiers, non-ASCII characters
inside classes.
"""

from __future__ import annotations

from dataclasses import dataclass

ALL_BYTES = (1 << 256) - 1


class RegexError(Exception):
    """Base class for pattern errors; carries the offending position."""

    def __init__(self, message: str, pattern: str = "", position: int = 0):
        self.message = message
        self.pattern = pattern
        self.position = position
        super().__init__(f"{message} at position {position}")

    def caret(self) -> str:
        """Two-line diagnostic: the pattern and a caret under the position."""
        line = self.pattern.replace("\n", " ")
        return f"{line}\n{' ' * self.position}^ {self.message}"


class RegexSyntaxError(RegexError):
    pass


class UnsupportedConstruct(RegexError):
    def __init__(self, construct: str, pattern: str = "", position: int = 0):
        self.construct = construct
        super().__init__(f"unsupported construct: {construct}", pattern, position)


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ByteSet:
    mask: int


@dataclass(frozen=True)
class Concat:
    items: tuple


@dataclass(frozen=True)
class Alt:
    items: tuple


@dataclass(frozen=True)
class Repeat:
    item: object
    min: int
    max: int | None


@dataclass(frozen=True)
class Anchor:
    kind: str  # "start" or "end"


EMPTY = Concat(())


def mask_of(byte_values) -> int:
    mask = 0
    for b in byte_values:
        mask |= 1 << b
    return mask


def mask_range(lo: int, hi: int) -> int:
    return ((1 << (hi + 1)) - 1) ^ ((1 << lo) - 1)


def mask_bytes(mask: int) -> list[int]:
    return [b for b in range(256) if mask >> b & 1]


DIGIT = mask_range(0x30, 0x39)
WORD = DIGIT | mask_range(0x41, 0x5A) | mask_range(0x61, 0x7A) | (1 << 0x5F)
SPACE = mask_of(b" \t\n\r\f\v")

_CLASS_ESCAPES = {
    "d": DIGIT,
    "D": ALL_BYTES ^ DIGIT,
    "w": WORD,
    "W": ALL_BYTES ^ WORD,
    "s": SPACE,
    "S": ALL_BYTES ^ SPACE,
}

_CONTROL_ESCAPES = {
    "n": 0x0A,
    "t": 0x09,
    "r": 0x0D,
    "f": 0x0C,
    "v": 0x0B,
    "a": 0x07,
}

_HEX = "0123456789abcdefABCDEF"
_OCTAL = "01234567"
MAX_REPEAT = 1000


class _Parser:
    def __init__(self, pattern: str):
        self.pattern = pattern
        self.pos = 0

    # -- helpers -----------------------------------------------------------

    def _peek(self, offset: int = 0) -> str | None:
        i = self.pos + offset
        return self.pattern[i] if i < len(self.pattern) else None

    def _startswith(self, text: str) -> bool:
        return self.pattern.startswith(text, self.pos)

    def _syntax(self, message: str, position: int | None = None) -> RegexSyntaxError:
        return RegexSyntaxError(message, self.pattern, self.pos if position is None else position)

    def _unsupported(self, construct: str, position: int | None = None) -> UnsupportedConstruct:
        return UnsupportedConstruct(construct, self.pattern, self.pos if position is None else position)

    # -- grammar -----------------------------------------------------------

    def parse(self):
        node = self._alternation()
        if self.pos < len(self.pattern):
            # only a stray ')' can stop the top-level alternation early
            raise self._syntax("unbalanced parenthesis")
        return node

    def _alternation(self):
        branches = [self._sequence()]
        while self._peek() == "|":
            self.pos += 1
            branches.append(self._sequence())
        return branches[0] if len(branches) == 1 else Alt(tuple(branches))

    def _sequence(self):
        items = []
        while True:
            ch = self._peek()
            if ch is None or ch in "|)":
                break
            atom_pos = self.pos
            atom = self._atom()
            if atom is None:
                continue
            atom = self._quantifiers(atom, atom_pos)
            items.append(atom)
        if len(items) == 1:
            return items[0]
        return Concat(tuple(items))

    def _quantifiers(self, atom, atom_pos: int):
        quantified = False
        while True:
            start = self.pos
            bounds = self._quantifier()
            if bounds is None:
                return atom
            if quantified:
                raise self._syntax("multiple repeat", start)
            if isinstance(atom, Anchor):
                raise self._syntax("nothing to repeat", start)
            lo, hi = bounds
            if self._peek() == "?":
                self.pos += 1  # lazy: same language under full match
            elif self._peek() == "+":
                raise self._unsupported("possessive quantifier")
            atom = Repeat(atom, lo, hi)
            quantified = True

    def _quantifier(self):
        ch = self._peek()
        if ch == "*":
            self.pos += 1
            return 0, None
        if ch == "+":
            self.pos += 1
            return 1, None
        if ch == "?":
            self.pos += 1
            return 0, 1
        if ch == "{":
            return self._braces()
        return None

    def _braces(self):
        """Parse ``{m}``, ``{m,}``, ``{m,n}``, ``{,n}``; ``{`` is literal otherwise."""
        end = self.pattern.find("}", self.pos)
        if end < 0:
            return None
        body = self.pattern[self.pos + 1 : end]
        lo_text, comma, hi_text = body.partition(",")
        if not (lo_text.isdigit() or (comma and lo_text == "")):
            return None
        if hi_text and not hi_text.isdigit():
            return None
        if not comma and not lo_text:
            return None
        lo = int(lo_text) if lo_text else 0
        hi = (int(hi_text) if hi_text else None) if comma else lo
        if hi is not None and hi < lo:
            raise self._syntax("min repeat greater than max repeat")
        if lo > MAX_REPEAT or (hi is not None and hi > MAX_REPEAT):
            raise self._unsupported(f"repeat count above {MAX_REPEAT}")
        self.pos = end + 1
        return lo, hi

    def _atom(self):
        ch = self._peek()
        pos = self.pos
        if ch in "*+?":
            raise self._syntax("nothing to repeat")
        if ch == "{" and self._braces_lookahead():
            raise self._syntax("nothing to repeat")
        if ch == "(":
            return self._group()
        if ch == "[":
            return ByteSet(self._class())
        if ch == ".":
            self.pos += 1
            return ByteSet(ALL_BYTES)
        if ch == "^":
            self.pos += 1
            return Anchor("start")
        if ch == "$":
            self.pos += 1
            return Anchor("end")
        if ch == "\\":
            return self._escape()
        self.pos += 1
        return _literal(ch)

    def _braces_lookahead(self) -> bool:
        saved = self.pos
        try:
            return self._braces() is not None
        finally:
            self.pos = saved

    def _group(self):
        open_pos = self.pos
        self.pos += 1
        if self._startswith("?"):
            if self._startswith("?:"):
                self.pos += 2
            elif self._startswith("?P<") or (self._startswith("?<") and self._peek(2) not in ("=", "!")):
                skip = 3 if self._startswith("?P<") else 2
                close = self.pattern.find(">", self.pos)
                name = self.pattern[self.pos + skip : close] if close >= 0 else ""
                if close < 0 or not name.isidentifier():
                    raise self._syntax("bad group name")
                self.pos = close + 1
            elif self._startswith("?#"):
                close = self.pattern.find(")", self.pos)
                if close < 0:
                    raise self._syntax("missing ), unterminated comment", open_pos)
                self.pos = close + 1
                return None
            elif self._startswith("?=") or self._startswith("?!"):
                raise self._unsupported("lookahead", open_pos)
            elif self._startswith("?<=") or self._startswith("?<!"):
                raise self._unsupported("lookbehind", open_pos)
            elif self._startswith("?P="):
                raise self._unsupported("backreference", open_pos)
            elif self._startswith("?("):
                raise self._unsupported("conditional group", open_pos)
            elif self._startswith("?>"):
                raise self._unsupported("atomic group", open_pos)
            else:
                raise self._unsupported("inline flags", open_pos)
        node = self._alternation()
        if self._peek() != ")":
            raise self._syntax("missing ), unterminated subpattern", open_pos)
        self.pos += 1
        return node

    def _escape(self):
        start = self.pos
        ch = self._peek(1)
        if ch is None:
            raise self._syntax("bad escape (end of pattern)")
        if ch in _CLASS_ESCAPES:
            self.pos += 2
            return ByteSet(_CLASS_ESCAPES[ch])
        if ch in "bB":
            raise self._unsupported("word boundary")
        if ch == "A":
            self.pos += 2
            return Anchor("start")
        if ch == "Z":
            self.pos += 2
            return Anchor("end")
        if ch in "123456789":
            raise self._unsupported("backreference")
        value = self._byte_escape(start)
        return ByteSet(1 << value)

    def _byte_escape(self, start: int) -> int:
        """Escapes denoting one byte value, shared by atoms and classes."""
        ch = self._peek(1)
        if ch == "x":
            digits = self.pattern[self.pos + 2 : self.pos + 4]
            if len(digits) != 2 or any(d not in _HEX for d in digits):
                raise self._syntax("incomplete escape \\x", start)
            self.pos += 4
            return int(digits, 16)
        if ch == "0":
            self.pos += 2
            digits = ""
            while len(digits) < 2 and self._peek() is not None and self._peek() in _OCTAL:
                digits += self._peek()
                self.pos += 1
            return int(digits or "0", 8)
        if ch in _CONTROL_ESCAPES:
            self.pos += 2
            return _CONTROL_ESCAPES[ch]
        if ch in "uUN":
            raise self._unsupported(f"\\{ch} escape", start)
        if ch.isascii() and ch.isalnum():
            raise self._syntax(f"bad escape \\{ch}", start)
        encoded = ch.encode("utf-8")
        if len(encoded) != 1:
            raise self._unsupported("escaped non-ASCII character", start)
        self.pos += 2
        return encoded[0]

    def _class(self) -> int:
        open_pos = self.pos
        self.pos += 1
        negate = False
        if self._peek() == "^":
            negate = True
            self.pos += 1
        mask = 0
        first = True
        while True:
            ch = self._peek()
            if ch is None:
                raise self._syntax("unterminated character set", open_pos)
            if ch == "]" and not first:
                self.pos += 1
                break
            first = False
            item_pos = self.pos
            lo = self._class_item()
            if self._peek() == "-" and self._peek(1) not in (None, "]"):
                self.pos += 1
                hi = self._class_item()
                if not isinstance(lo, _Mask) and not isinstance(hi, _Mask):
                    if hi < lo:
                        raise self._syntax("bad character range", item_pos)
                    mask |= mask_range(lo, hi)
                    continue
                raise self._syntax("bad character range", item_pos)
            mask |= lo if isinstance(lo, _Mask) else 1 << lo
        return ALL_BYTES ^ mask if negate else mask

    def _class_item(self):
        """One class member: a byte value (int) or a multi-byte escape (_Mask)."""
        ch = self._peek()
        start = self.pos
        if ch == "\\":
            nxt = self._peek(1)
            if nxt in _CLASS_ESCAPES:
                self.pos += 2
                return _Mask(_CLASS_ESCAPES[nxt])
            if nxt == "b":
                self.pos += 2
                return 0x08
            if nxt is not None and nxt in "123456789":
                raise self._unsupported("octal or backreference escape in class")
            if nxt is None:
                raise self._syntax("unterminated character set")
            return self._byte_escape(start)
        encoded = ch.encode("utf-8")
        if len(encoded) != 1:
            raise self._unsupported("non-ASCII character in class")
        self.pos += 1
        return encoded[0]


class _Mask(int):
    """Marks a class member that already denotes a byte set."""


def _literal(ch: str):
    encoded = ch.encode("utf-8")
    if len(encoded) == 1:
        return ByteSet(1 << encoded[0])
    return Concat(tuple(ByteSet(1 << b) for b in encoded))


def parse(pattern: str):
    """Parse ``pattern`` into an AST of ByteSet/Concat/Alt/Repeat/Anchor nodes."""
    return _Parser(pattern).parse()
