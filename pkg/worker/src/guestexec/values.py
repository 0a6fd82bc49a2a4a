"""Canonical-text codec and the guest value mapping.

Implements the engine's documented value grammar (docs/value-grammar.md in
the engine repository) without importing the engine: the wire protocol is the
only shared surface.

Guest-side mapping:

    canonical        -> guest                 guest           -> canonical
    integer          -> int                   int             -> integer
    on / off         -> True / False          bool, "on"/"off"-> on / off
    null             -> None                  (None signals undefined, see below)
    [..] list        -> list                  list / tuple    -> [..] list
    {..} grid        -> list of row lists     row lists*      -> {..} grid
    (c,s,m) entity   -> (c, s, m) str tuple   3-tuple of vocab-> entity

*A returned rectangular, non-empty list-of-lists-of-ints encodes as a grid
only when the call's input was a grid (grid problems map grids to grids);
otherwise it encodes as a nested list. A guest returns None to decline an
input, so the null value is not producible from guests.
"""

from __future__ import annotations

COLORS = ("blue", "brown", "cyan", "gray", "green", "purple", "red", "yellow")
SHAPES = ("cube", "cylinder", "sphere")
MATERIALS = ("metal", "rubber")

_ATTRS = (set(COLORS), set(SHAPES), set(MATERIALS))


class CodecError(ValueError):
    pass


class _Decoder:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message: str) -> CodecError:
        return CodecError(f"{message} (at position {self.pos})")

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, char: str) -> None:
        if self.peek() != char:
            raise self.error(f"expected {char!r}")
        self.pos += 1

    def value(self):
        ch = self.peek()
        if ch == "[":
            return self.list_value()
        if ch == "{":
            return self.grid_value()
        if ch == "(":
            return self.entity_value()
        if ch == "-" or ch.isdigit():
            return self.int_value()
        if ch.isalpha():
            return self.word_value()
        raise self.error("expected a value")

    def int_value(self) -> int:
        start = self.pos
        if self.peek() == "-":
            self.pos += 1
        if not self.peek().isdigit():
            raise self.error("expected digits")
        while self.peek().isdigit():
            self.pos += 1
        return int(self.text[start : self.pos])

    def word_value(self):
        start = self.pos
        while self.peek().isalpha():
            self.pos += 1
        word = self.text[start : self.pos]
        if word == "on":
            return True
        if word == "off":
            return False
        if word == "null":
            return None
        raise self.error(f"unknown word {word!r}")

    def list_value(self) -> list:
        self.expect("[")
        items = []
        if self.peek() != "]":
            items.append(self.value())
            while self.peek() == ",":
                self.pos += 1
                items.append(self.value())
        self.expect("]")
        return items

    def row(self) -> list:
        cells = [self.int_value()]
        while self.peek() == ",":
            self.pos += 1
            cells.append(self.int_value())
        return cells

    def grid_value(self) -> list:
        self.expect("{")
        rows = []
        if self.peek() != "}":
            rows.append(self.row())
            while self.peek() == "|":
                self.pos += 1
                rows.append(self.row())
        self.expect("}")
        if rows and len({len(r) for r in rows}) != 1:
            raise self.error("ragged grid rows")
        return rows

    def name(self) -> str:
        start = self.pos
        while self.peek().isalpha():
            self.pos += 1
        if self.pos == start:
            raise self.error("expected an attribute name")
        return self.text[start : self.pos]

    def entity_value(self) -> tuple:
        self.expect("(")
        parts = [self.name()]
        self.expect(",")
        parts.append(self.name())
        self.expect(",")
        parts.append(self.name())
        self.expect(")")
        for part, vocab in zip(parts, _ATTRS):
            if part not in vocab:
                raise self.error(f"unknown attribute {part!r}")
        return tuple(parts)


def decode(text: str):
    """Canonical text -> guest value. Grids become lists of row lists."""
    decoder = _Decoder(text.strip())
    value = decoder.value()
    if decoder.pos != len(decoder.text):
        raise decoder.error("trailing characters after value")
    return value


def is_grid_text(text: str) -> bool:
    return text.strip().startswith("{")


def _is_row(row) -> bool:
    return (
        isinstance(row, (list, tuple))
        and len(row) > 0
        and all(isinstance(c, int) and not isinstance(c, bool) for c in row)
    )


def _looks_like_grid(value) -> bool:
    if not isinstance(value, (list, tuple)) or len(value) == 0:
        return False
    if not all(_is_row(row) for row in value):
        return False
    return len({len(row) for row in value}) == 1


def _is_entity(value) -> bool:
    return (
        isinstance(value, tuple)
        and len(value) == 3
        and all(isinstance(p, str) for p in value)
        and value[0] in _ATTRS[0]
        and value[1] in _ATTRS[1]
        and value[2] in _ATTRS[2]
    )


def encode(value, grid_context: bool = False) -> str:
    """Guest value -> canonical text; raises CodecError when not encodable."""
    if isinstance(value, bool):
        return "on" if value else "off"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        if value in ("on", "off"):
            return value
        raise CodecError(f"string {value!r} is not encodable")
    if value is None:
        return "null"
    if _is_entity(value):
        return f"({value[0]},{value[1]},{value[2]})"
    if grid_context and _looks_like_grid(value):
        return "{" + "|".join(",".join(str(c) for c in row) for row in value) + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(encode(item, grid_context) for item in value) + "]"
    raise CodecError(f"value of type {type(value).__name__} is not encodable")
