"""Value universe shared by all datasets: integers, on/off labels, lists,
grids, and attribute entities, with a deterministic canonical text form.

The canonical grammar (documented in docs/value-grammar.md) is the single
interchange format: space files, transcripts, and the worker wire protocol
all carry values as canonical text.

Grammar summary (no whitespace anywhere):

    value   := integer | 'on' | 'off' | 'null' | list | grid | entity
    integer := '-'? digits
    list    := '[' (value (',' value)*)? ']'
    grid    := '{' (row ('|' row)*)? '}'      row := integer (',' integer)*
    entity  := '(' color ',' shape ',' material ')'
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence, Tuple, Union

COLORS = ("blue", "brown", "cyan", "gray", "green", "purple", "red", "yellow")
SHAPES = ("cube", "cylinder", "sphere")
MATERIALS = ("metal", "rubber")


class StructuralError(ValueError):
    """A value violates its variant invariants (ragged grid, bad vocab, ...)."""


class ValueParseError(ValueError):
    """Canonical text does not conform to the grammar."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


@dataclass(frozen=True)
class Grid:
    """Rectangular grid of small integers; rows is a tuple of equal-length tuples."""

    rows: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(row) for row in self.rows)
        object.__setattr__(self, "rows", rows)
        widths = {len(row) for row in rows}
        if len(widths) > 1:
            raise StructuralError("ragged grid rows")
        if rows and len(rows[0]) == 0:
            raise StructuralError("grid rows must be non-empty")
        for row in rows:
            for cell in row:
                if isinstance(cell, bool) or not isinstance(cell, int):
                    raise StructuralError("grid cells must be integers")

    @property
    def height(self) -> int:
        return len(self.rows)

    @property
    def width(self) -> int:
        return len(self.rows[0]) if self.rows else 0


@dataclass(frozen=True)
class Entity:
    """One object with closed-vocabulary color, shape, and material attributes."""

    color: str
    shape: str
    material: str

    def __post_init__(self):
        if self.color not in COLORS:
            raise StructuralError(f"unknown color {self.color!r}")
        if self.shape not in SHAPES:
            raise StructuralError(f"unknown shape {self.shape!r}")
        if self.material not in MATERIALS:
            raise StructuralError(f"unknown material {self.material!r}")


# Integers are plain ints, on/off labels are bools, null is None, lists are
# tuples. bool is checked before int everywhere since bool subclasses int.
Value = Union[int, bool, None, Tuple["Value", ...], Grid, Entity]


def freeze(value) -> Value:
    """Convert nested lists to tuples so a value is hashable and immutable."""
    if isinstance(value, list):
        return tuple(freeze(item) for item in value)
    return value


def canonicalize(value: Value) -> str:
    """Render a value as its unique canonical text.

    Equal values yield byte-identical text regardless of how they were
    constructed; distinct values never collide (each variant has its own
    delimiters).
    """
    if isinstance(value, bool):
        return "on" if value else "off"
    if isinstance(value, int):
        return str(value)
    if value is None:
        return "null"
    if isinstance(value, Entity):
        return f"({value.color},{value.shape},{value.material})"
    if isinstance(value, Grid):
        return "{" + "|".join(",".join(str(c) for c in row) for row in value.rows) + "}"
    if isinstance(value, (tuple, list)):
        return "[" + ",".join(canonicalize(item) for item in value) + "]"
    raise StructuralError(f"not a value: {type(value).__name__}")


def equal_values(a: Value, b: Value) -> bool:
    """True iff the two values have identical canonical text."""
    return canonicalize(a) == canonicalize(b)


class _Parser:
    """Recursive-descent parser over canonical text; tracks position for errors."""

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message: str) -> ValueParseError:
        return ValueParseError(message, self.pos)

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, char: str) -> None:
        if self.peek() != char:
            raise self.error(f"expected {char!r}")
        self.pos += 1

    def parse_value(self) -> Value:
        ch = self.peek()
        if ch == "[":
            return self.parse_list()
        if ch == "{":
            return self.parse_grid()
        if ch == "(":
            return self.parse_entity()
        if ch == "-" or ch.isdigit():
            return self.parse_int()
        if ch.isalpha():
            return self.parse_word()
        raise self.error("expected a value")

    def parse_int(self) -> int:
        start = self.pos
        if self.peek() == "-":
            self.pos += 1
        if not self.peek().isdigit():
            raise self.error("expected digits")
        while self.peek().isdigit():
            self.pos += 1
        return int(self.text[start : self.pos])

    def parse_word(self) -> Value:
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
        self.pos = start
        raise self.error(f"unknown word {word!r}")

    def parse_list(self) -> Tuple[Value, ...]:
        self.expect("[")
        items = []
        if self.peek() != "]":
            items.append(self.parse_value())
            while self.peek() == ",":
                self.pos += 1
                items.append(self.parse_value())
        self.expect("]")
        return tuple(items)

    def parse_row(self) -> Tuple[int, ...]:
        cells = [self.parse_int()]
        while self.peek() == ",":
            self.pos += 1
            cells.append(self.parse_int())
        return tuple(cells)

    def parse_grid(self) -> Grid:
        self.expect("{")
        rows = []
        if self.peek() != "}":
            rows.append(self.parse_row())
            while self.peek() == "|":
                self.pos += 1
                rows.append(self.parse_row())
        self.expect("}")
        try:
            return Grid(tuple(rows))
        except StructuralError as exc:
            raise self.error(str(exc))

    def parse_name(self) -> str:
        start = self.pos
        while self.peek().isalpha():
            self.pos += 1
        if self.pos == start:
            raise self.error("expected an attribute name")
        return self.text[start : self.pos]

    def parse_entity(self) -> Entity:
        self.expect("(")
        color = self.parse_name()
        self.expect(",")
        shape = self.parse_name()
        self.expect(",")
        material = self.parse_name()
        self.expect(")")
        try:
            return Entity(color, shape, material)
        except StructuralError as exc:
            raise self.error(str(exc))


def parse_value(text: str) -> Value:
    """Parse canonical text back into a value (inverse of canonicalize)."""
    parser = _Parser(text.strip())
    value = parser.parse_value()
    if parser.pos != len(parser.text):
        raise parser.error("trailing characters after value")
    return value


@dataclass(frozen=True)
class Observation:
    """One input/output pair."""

    input: Value
    output: Value

    def key(self) -> Tuple[str, str]:
        return (canonicalize(self.input), canonicalize(self.output))


@dataclass(frozen=True)
class ObservationSet:
    """Ordered, duplicate-free observations of one problem."""

    problem_id: str
    pairs: Tuple[Observation, ...]
    provenance: str = "pooled"
    pair_provenance: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))
        seen = set()
        for obs in self.pairs:
            key = obs.key()
            if key in seen:
                raise StructuralError(
                    f"duplicate observation {key} in problem {self.problem_id}"
                )
            seen.add(key)
        if self.pair_provenance and len(self.pair_provenance) != len(self.pairs):
            raise StructuralError("pair_provenance length mismatch")

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[Observation]:
        return iter(self.pairs)


def dedup_pairs(pairs: Sequence[Observation]) -> Tuple[Tuple[Observation, ...], int]:
    """Drop exact duplicates, keeping first-seen order; returns (pairs, dropped)."""
    seen = set()
    kept = []
    for obs in pairs:
        key = obs.key()
        if key not in seen:
            seen.add(key)
            kept.append(obs)
    return tuple(kept), len(pairs) - len(kept)
