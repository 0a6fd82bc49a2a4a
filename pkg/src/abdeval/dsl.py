"""Pure expression language for hypothesis programs.

Programs are single expressions over the value universe with the input bound
to ``x``. The language has no I/O, no randomness, and no mutable state, so
evaluation is referentially transparent; resource use is bounded by a step
budget (every expression node and every element touched by a list/grid
builtin costs one step) and an optional wall-clock deadline.

Surface syntax::

    if contains(x,6) then [6] else [0]
    fold(+, 0, filter(fn(v) -> v % 2 == 0, x))
    if length(x) > 0 then sort(x)[0] else undefined
    length(filter(fn(e) -> color(e) == red, x))

Literals reuse the canonical value grammar verbatim: integers, ``on``/``off``,
``null``, lists ``[1,2]``, grids ``{1,2|3,4}``, entities ``(red,cube,metal)``.
The canonical text of any value therefore parses as a program denoting it.

``undefined`` aborts evaluation with an undefined outcome; it is how a
program declines an input (partial domain). Operators ``+ - * / %`` may be
passed as function arguments (``fold(+,0,x)``); ``/`` and ``%`` are floor
division and floor modulus on integers.
"""

from __future__ import annotations

import operator
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

from .values import COLORS, MATERIALS, SHAPES, Entity, Grid, Value

MAX_INT_BITS = 1_000_000    # memory guard: operands beyond this abort the call
_TIME_CHECK_EVERY = 4096


class DslParseError(ValueError):
    """Source text is not a well-formed program."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class DslRuntimeError(Exception):
    """Evaluation failed (type mismatch, bad index, division by zero, ...)."""


class UndefinedResult(Exception):
    """The program declined the input via ``undefined``."""


class StepBudgetExceeded(Exception):
    """The step budget ran out."""


class TimeBudgetExceeded(Exception):
    """The wall-clock deadline passed."""


class Symbol(str):
    """Entity-attribute word (``red``, ``cube``, ...); internal to the DSL."""

    __slots__ = ()


_SYMBOL_WORDS = {word: Symbol(word) for word in COLORS + SHAPES + MATERIALS}

_KEYWORDS = {
    "if", "then", "else", "and", "or", "not", "fn",
    "on", "off", "null", "undefined",
}


class _Ctx:
    """Mutable evaluation budget, shared down the call tree."""

    __slots__ = ("used", "limit", "deadline", "next_check")

    def __init__(self, step_limit: int, deadline: Optional[float]):
        self.used = 0
        self.limit = step_limit
        self.deadline = deadline
        self.next_check = _TIME_CHECK_EVERY

    def tick(self, count: int = 1) -> None:
        self.used += count
        if self.used > self.limit:
            raise StepBudgetExceeded()
        if self.used >= self.next_check:
            self.next_check = self.used + _TIME_CHECK_EVERY
            if self.deadline is not None and time.monotonic() > self.deadline:
                raise TimeBudgetExceeded()


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

_PUNCT = set("()[]{},|:")
_TWO_CHAR = ("->", "==", "!=", "<=", ">=")
_ONE_CHAR = set("+-*/%<>")


@dataclass(frozen=True)
class _Token:
    kind: str       # num | ident | punct | op | eof
    text: str
    pos: int


def _tokenize(source: str) -> List[_Token]:
    tokens = []
    i = 0
    n = len(source)
    while i < n:
        ch = source[i]
        if ch in " \t\r\n":
            i += 1
            continue
        if ch.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            tokens.append(_Token("num", source[i:j], i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(_Token("ident", source[i:j], i))
            i = j
            continue
        two = source[i : i + 2]
        if two in _TWO_CHAR:
            tokens.append(_Token("op", two, i))
            i += 2
            continue
        if ch in _PUNCT:
            tokens.append(_Token("punct", ch, i))
            i += 1
            continue
        if ch in _ONE_CHAR:
            tokens.append(_Token("op", ch, i))
            i += 1
            continue
        raise DslParseError(f"unexpected character {ch!r}", i)
    tokens.append(_Token("eof", "", n))
    return tokens


# ---------------------------------------------------------------------------
# Runtime value helpers
# ---------------------------------------------------------------------------


def _type_name(value) -> str:
    if isinstance(value, Symbol):
        return "attribute"
    if isinstance(value, bool):
        return "onoff"
    if isinstance(value, int):
        return "integer"
    if value is None:
        return "null"
    if isinstance(value, tuple):
        return "list"
    if isinstance(value, Grid):
        return "grid"
    if isinstance(value, Entity):
        return "entity"
    if callable(value):
        return "function"
    return type(value).__name__


def _need_int(value) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise DslRuntimeError(f"expected integer, got {_type_name(value)}")
    return value


def _need_bool(value) -> bool:
    if not isinstance(value, bool):
        raise DslRuntimeError(f"expected on/off, got {_type_name(value)}")
    return value


def _need_list(value) -> tuple:
    if not isinstance(value, tuple):
        raise DslRuntimeError(f"expected list, got {_type_name(value)}")
    return value


def _need_grid(value) -> Grid:
    if not isinstance(value, Grid):
        raise DslRuntimeError(f"expected grid, got {_type_name(value)}")
    return value


def _need_entity(value) -> Entity:
    if not isinstance(value, Entity):
        raise DslRuntimeError(f"expected entity, got {_type_name(value)}")
    return value


def _need_callable(value):
    if not callable(value):
        raise DslRuntimeError(f"expected function, got {_type_name(value)}")
    return value


def structurally_equal(a, b) -> bool:
    """Type-aware equality: on/off never equals an integer, lists compare
    elementwise, grids and entities compare by content."""
    if isinstance(a, Symbol) or isinstance(b, Symbol):
        return isinstance(a, Symbol) and isinstance(b, Symbol) and str(a) == str(b)
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a == b
    if isinstance(a, int) and isinstance(b, int):
        return a == b
    if a is None or b is None:
        return a is None and b is None
    if isinstance(a, tuple) and isinstance(b, tuple):
        if len(a) != len(b):
            return False
        return all(structurally_equal(u, v) for u, v in zip(a, b))
    if isinstance(a, Grid) and isinstance(b, Grid):
        return a.rows == b.rows
    if isinstance(a, Entity) and isinstance(b, Entity):
        return a == b
    return False


def _checked_mul(a: int, b: int) -> int:
    if a.bit_length() + b.bit_length() > MAX_INT_BITS:
        raise StepBudgetExceeded()
    return a * b


def _int_sort_key(value):
    return _need_int(value)


# ---------------------------------------------------------------------------
# Builtins
# ---------------------------------------------------------------------------


def _bi_length(ctx, xs):
    if isinstance(xs, Grid):
        return xs.height
    return len(_need_list(xs))


def _bi_contains(ctx, xs, v):
    xs = _need_list(xs)
    ctx.tick(len(xs))
    return any(structurally_equal(item, v) for item in xs)


def _bi_count(ctx, xs, v):
    xs = _need_list(xs)
    ctx.tick(len(xs))
    return sum(1 for item in xs if structurally_equal(item, v))


def _bi_reverse(ctx, xs):
    xs = _need_list(xs)
    ctx.tick(len(xs))
    return tuple(reversed(xs))


def _bi_sort(ctx, xs):
    xs = _need_list(xs)
    ctx.tick(len(xs))
    return tuple(sorted(xs, key=_int_sort_key))


def _bi_unique(ctx, xs):
    xs = _need_list(xs)
    ctx.tick(len(xs))
    seen = []
    for item in xs:
        if not any(structurally_equal(item, kept) for kept in seen):
            seen.append(item)
    return tuple(seen)


def _bi_first(ctx, xs):
    xs = _need_list(xs)
    if not xs:
        raise DslRuntimeError("first of empty list")
    return xs[0]


def _bi_last(ctx, xs):
    xs = _need_list(xs)
    if not xs:
        raise DslRuntimeError("last of empty list")
    return xs[-1]


def _bi_append(ctx, xs, v):
    xs = _need_list(xs)
    ctx.tick(len(xs))
    return xs + (v,)


def _bi_concat(ctx, xs, ys):
    xs = _need_list(xs)
    ys = _need_list(ys)
    ctx.tick(len(xs) + len(ys))
    return xs + ys


def _bi_range(ctx, a, b):
    a = _need_int(a)
    b = _need_int(b)
    span = max(0, b - a)
    ctx.tick(span)
    return tuple(range(a, b))


def _bi_sum(ctx, xs):
    xs = _need_list(xs)
    ctx.tick(len(xs))
    total = 0
    for item in xs:
        total += _need_int(item)
    return total


def _bi_abs(ctx, v):
    return abs(_need_int(v))


def _bi_min(ctx, *args):
    return _minmax(ctx, args, min)


def _bi_max(ctx, *args):
    return _minmax(ctx, args, max)


def _minmax(ctx, args, pick):
    if len(args) == 1:
        xs = _need_list(args[0])
        if not xs:
            raise DslRuntimeError("min/max of empty list")
        ctx.tick(len(xs))
        return pick(_need_int(v) for v in xs)
    if len(args) == 2:
        return pick(_need_int(args[0]), _need_int(args[1]))
    raise DslRuntimeError("min/max takes a list or two integers")


def _bi_map(ctx, fn, xs):
    fn = _need_callable(fn)
    xs = _need_list(xs)
    ctx.tick(len(xs))
    return tuple(fn(ctx, (item,)) for item in xs)


def _bi_filter(ctx, fn, xs):
    fn = _need_callable(fn)
    xs = _need_list(xs)
    ctx.tick(len(xs))
    return tuple(item for item in xs if _need_bool(fn(ctx, (item,))))


def _bi_fold(ctx, fn, init, xs):
    fn = _need_callable(fn)
    xs = _need_list(xs)
    ctx.tick(len(xs))
    acc = init
    for item in xs:
        acc = fn(ctx, (acc, item))
    return acc


def _bi_rows(ctx, g):
    return _need_grid(g).height


def _bi_cols(ctx, g):
    return _need_grid(g).width


def _bi_cell(ctx, g, i, j):
    g = _need_grid(g)
    i = _need_int(i)
    j = _need_int(j)
    if not (0 <= i < g.height and 0 <= j < g.width):
        raise DslRuntimeError(f"cell ({i},{j}) outside {g.height}x{g.width} grid")
    return g.rows[i][j]


def _bi_row(ctx, g, i):
    g = _need_grid(g)
    i = _need_int(i)
    if not 0 <= i < g.height:
        raise DslRuntimeError(f"row {i} outside grid")
    ctx.tick(g.width)
    return g.rows[i]


def _bi_col(ctx, g, j):
    g = _need_grid(g)
    j = _need_int(j)
    if not 0 <= j < g.width:
        raise DslRuntimeError(f"column {j} outside grid")
    ctx.tick(g.height)
    return tuple(row[j] for row in g.rows)


def _bi_transpose(ctx, g):
    g = _need_grid(g)
    ctx.tick(g.height * g.width)
    return Grid(tuple(zip(*g.rows))) if g.rows else Grid(())


def _bi_flip_h(ctx, g):
    g = _need_grid(g)
    ctx.tick(g.height * g.width)
    return Grid(tuple(tuple(reversed(row)) for row in g.rows))


def _bi_flip_v(ctx, g):
    g = _need_grid(g)
    ctx.tick(g.height * g.width)
    return Grid(tuple(reversed(g.rows)))


def _bi_rotate90(ctx, g):
    g = _need_grid(g)
    ctx.tick(g.height * g.width)
    if not g.rows:
        return g
    return Grid(tuple(zip(*reversed(g.rows))))


def _bi_grid(ctx, rows):
    rows = _need_list(rows)
    cells = []
    for row in rows:
        row = _need_list(row)
        ctx.tick(len(row))
        cells.append(tuple(_need_int(c) for c in row))
    try:
        return Grid(tuple(cells))
    except Exception as exc:
        raise DslRuntimeError(str(exc))


def _bi_cells(ctx, g):
    g = _need_grid(g)
    ctx.tick(g.height * g.width)
    return tuple(c for row in g.rows for c in row)


def _bi_map_cells(ctx, fn, g):
    fn = _need_callable(fn)
    g = _need_grid(g)
    ctx.tick(g.height * g.width)
    rows = tuple(
        tuple(_need_int(fn(ctx, (c,))) for c in row) for row in g.rows
    )
    return Grid(rows)


def _bi_color(ctx, e):
    return _SYMBOL_WORDS[_need_entity(e).color]


def _bi_shape(ctx, e):
    return _SYMBOL_WORDS[_need_entity(e).shape]


def _bi_material(ctx, e):
    return _SYMBOL_WORDS[_need_entity(e).material]


def _bi_entity(ctx, c, s, m):
    for part in (c, s, m):
        if not isinstance(part, Symbol):
            raise DslRuntimeError("entity() takes three attribute words")
    try:
        return Entity(str(c), str(s), str(m))
    except Exception as exc:
        raise DslRuntimeError(str(exc))


def _bi_is_int(ctx, v):
    return isinstance(v, int) and not isinstance(v, bool)


def _bi_is_list(ctx, v):
    return isinstance(v, tuple)


def _bi_is_grid(ctx, v):
    return isinstance(v, Grid)


def _bi_is_entity(ctx, v):
    return isinstance(v, Entity)


class _Builtin:
    """Named builtin with fixed arity bounds; callable as fn(ctx, args)."""

    __slots__ = ("name", "min_arity", "max_arity", "impl")

    def __init__(self, name, min_arity, max_arity, impl):
        self.name = name
        self.min_arity = min_arity
        self.max_arity = max_arity
        self.impl = impl

    def __call__(self, ctx, args):
        if not (self.min_arity <= len(args) <= self.max_arity):
            raise DslRuntimeError(
                f"{self.name} expects {self.min_arity}"
                + (f"..{self.max_arity}" if self.max_arity != self.min_arity else "")
                + f" arguments, got {len(args)}"
            )
        return self.impl(ctx, *args)


def _make_operator(symbol: str):
    def impl(ctx, a, b):
        return _apply_binary(symbol, a, b)

    return _Builtin(symbol, 2, 2, impl)


def _apply_binary(symbol: str, a, b):
    x = _need_int(a)
    y = _need_int(b)
    if symbol == "+":
        return x + y
    if symbol == "-":
        return x - y
    if symbol == "*":
        return _checked_mul(x, y)
    if symbol == "/":
        if y == 0:
            raise DslRuntimeError("division by zero")
        return x // y
    if symbol == "%":
        if y == 0:
            raise DslRuntimeError("modulo by zero")
        return x % y
    raise DslRuntimeError(f"unknown operator {symbol}")


BUILTINS: Dict[str, _Builtin] = {
    b.name: b
    for b in [
        _Builtin("length", 1, 1, _bi_length),
        _Builtin("contains", 2, 2, _bi_contains),
        _Builtin("count", 2, 2, _bi_count),
        _Builtin("reverse", 1, 1, _bi_reverse),
        _Builtin("sort", 1, 1, _bi_sort),
        _Builtin("unique", 1, 1, _bi_unique),
        _Builtin("first", 1, 1, _bi_first),
        _Builtin("last", 1, 1, _bi_last),
        _Builtin("append", 2, 2, _bi_append),
        _Builtin("concat", 2, 2, _bi_concat),
        _Builtin("range", 2, 2, _bi_range),
        _Builtin("sum", 1, 1, _bi_sum),
        _Builtin("abs", 1, 1, _bi_abs),
        _Builtin("min", 1, 2, _bi_min),
        _Builtin("max", 1, 2, _bi_max),
        _Builtin("map", 2, 2, _bi_map),
        _Builtin("filter", 2, 2, _bi_filter),
        _Builtin("fold", 3, 3, _bi_fold),
        _Builtin("rows", 1, 1, _bi_rows),
        _Builtin("cols", 1, 1, _bi_cols),
        _Builtin("cell", 3, 3, _bi_cell),
        _Builtin("row", 2, 2, _bi_row),
        _Builtin("col", 2, 2, _bi_col),
        _Builtin("transpose", 1, 1, _bi_transpose),
        _Builtin("flip_h", 1, 1, _bi_flip_h),
        _Builtin("flip_v", 1, 1, _bi_flip_v),
        _Builtin("rotate90", 1, 1, _bi_rotate90),
        _Builtin("grid", 1, 1, _bi_grid),
        _Builtin("cells", 1, 1, _bi_cells),
        _Builtin("map_cells", 2, 2, _bi_map_cells),
        _Builtin("color", 1, 1, _bi_color),
        _Builtin("shape", 1, 1, _bi_shape),
        _Builtin("material", 1, 1, _bi_material),
        _Builtin("entity", 3, 3, _bi_entity),
        _Builtin("is_int", 1, 1, _bi_is_int),
        _Builtin("is_list", 1, 1, _bi_is_list),
        _Builtin("is_grid", 1, 1, _bi_is_grid),
        _Builtin("is_entity", 1, 1, _bi_is_entity),
    ]
}

_OPERATOR_REFS = {sym: _make_operator(sym) for sym in "+-*/%"}


# ---------------------------------------------------------------------------
# Parser: tokens -> compiled closure fn(ctx, env) -> runtime value
# ---------------------------------------------------------------------------


class _Lambda:
    """User function; carries its defining environment."""

    __slots__ = ("params", "body", "env")

    def __init__(self, params, body, env):
        self.params = params
        self.body = body
        self.env = env

    def __call__(self, ctx, args):
        if len(args) != len(self.params):
            raise DslRuntimeError(
                f"function expects {len(self.params)} arguments, got {len(args)}"
            )
        env = dict(self.env)
        for name, value in zip(self.params, args):
            env[name] = value
        return self.body(ctx, env)


class _ProgramParser:
    def __init__(self, source: str):
        self.tokens = _tokenize(source)
        self.index = 0

    @property
    def current(self) -> _Token:
        return self.tokens[self.index]

    def ahead(self, offset: int = 1) -> _Token:
        j = min(self.index + offset, len(self.tokens) - 1)
        return self.tokens[j]

    def error(self, message: str) -> DslParseError:
        return DslParseError(message, self.current.pos)

    def advance(self) -> _Token:
        token = self.current
        self.index += 1
        return token

    def accept(self, kind: str, text: str) -> bool:
        if self.current.kind == kind and self.current.text == text:
            self.index += 1
            return True
        return False

    def expect(self, kind: str, text: str) -> None:
        if not self.accept(kind, text):
            raise self.error(f"expected {text!r}")

    def parse(self, scope: set) -> Callable:
        body = self.parse_expr(scope)
        if self.current.kind != "eof":
            raise self.error(f"unexpected {self.current.text!r}")
        return body

    def parse_expr(self, scope: set) -> Callable:
        if self.current.kind == "ident" and self.current.text == "if":
            return self.parse_if(scope)
        if self.current.kind == "ident" and self.current.text == "fn":
            return self.parse_lambda(scope)
        return self.parse_or(scope)

    def parse_if(self, scope: set) -> Callable:
        self.expect("ident", "if")
        cond = self.parse_expr(scope)
        self.expect("ident", "then")
        then_branch = self.parse_expr(scope)
        self.expect("ident", "else")
        else_branch = self.parse_expr(scope)

        def run(ctx, env):
            ctx.tick()
            if _need_bool(cond(ctx, env)):
                return then_branch(ctx, env)
            return else_branch(ctx, env)

        return run

    def parse_lambda(self, scope: set) -> Callable:
        self.expect("ident", "fn")
        self.expect("punct", "(")
        params = []
        if not self.accept("punct", ")"):
            while True:
                token = self.current
                if token.kind != "ident" or token.text in _KEYWORDS:
                    raise self.error("expected parameter name")
                if token.text in BUILTINS or token.text in _SYMBOL_WORDS:
                    raise self.error(f"parameter shadows builtin {token.text!r}")
                params.append(self.advance().text)
                if self.accept("punct", ")"):
                    break
                self.expect("punct", ",")
        self.expect("op", "->")
        body = self.parse_expr(scope | set(params))
        params_tuple = tuple(params)

        def run(ctx, env):
            ctx.tick()
            return _Lambda(params_tuple, body, env)

        return run

    def parse_or(self, scope: set) -> Callable:
        left = self.parse_and(scope)
        while self.current.kind == "ident" and self.current.text == "or":
            self.advance()
            right = self.parse_and(scope)
            left = self._make_or(left, right)
        return left

    @staticmethod
    def _make_or(left, right):
        def run(ctx, env):
            ctx.tick()
            if _need_bool(left(ctx, env)):
                return True
            return _need_bool(right(ctx, env))

        return run

    def parse_and(self, scope: set) -> Callable:
        left = self.parse_not(scope)
        while self.current.kind == "ident" and self.current.text == "and":
            self.advance()
            right = self.parse_not(scope)
            left = self._make_and(left, right)
        return left

    @staticmethod
    def _make_and(left, right):
        def run(ctx, env):
            ctx.tick()
            if not _need_bool(left(ctx, env)):
                return False
            return _need_bool(right(ctx, env))

        return run

    def parse_not(self, scope: set) -> Callable:
        if self.current.kind == "ident" and self.current.text == "not":
            self.advance()
            inner = self.parse_not(scope)

            def run(ctx, env):
                ctx.tick()
                return not _need_bool(inner(ctx, env))

            return run
        return self.parse_comparison(scope)

    def parse_comparison(self, scope: set) -> Callable:
        left = self.parse_additive(scope)
        token = self.current
        if token.kind == "op" and token.text in ("==", "!=", "<", "<=", ">", ">="):
            symbol = self.advance().text
            right = self.parse_additive(scope)
            after = self.current
            if after.kind == "op" and after.text in ("==", "!=", "<", "<=", ">", ">="):
                raise self.error("chained comparisons are not supported")
            return self._make_comparison(symbol, left, right)
        return left

    @staticmethod
    def _make_comparison(symbol, left, right):
        if symbol == "==":
            def run(ctx, env):
                ctx.tick()
                return structurally_equal(left(ctx, env), right(ctx, env))
        elif symbol == "!=":
            def run(ctx, env):
                ctx.tick()
                return not structurally_equal(left(ctx, env), right(ctx, env))
        else:
            op = {"<": operator.lt, "<=": operator.le,
                  ">": operator.gt, ">=": operator.ge}[symbol]

            def run(ctx, env):
                ctx.tick()
                return op(_need_int(left(ctx, env)), _need_int(right(ctx, env)))

        return run

    def parse_additive(self, scope: set) -> Callable:
        left = self.parse_multiplicative(scope)
        while self.current.kind == "op" and self.current.text in "+-":
            symbol = self.advance().text
            right = self.parse_multiplicative(scope)
            left = self._make_binary(symbol, left, right)
        return left

    def parse_multiplicative(self, scope: set) -> Callable:
        left = self.parse_unary(scope)
        while self.current.kind == "op" and self.current.text in ("*", "/", "%"):
            symbol = self.advance().text
            right = self.parse_unary(scope)
            left = self._make_binary(symbol, left, right)
        return left

    @staticmethod
    def _make_binary(symbol, left, right):
        def run(ctx, env):
            ctx.tick()
            return _apply_binary(symbol, left(ctx, env), right(ctx, env))

        return run

    def _operator_ref_here(self) -> bool:
        token = self.current
        if token.kind != "op" or token.text not in _OPERATOR_REFS:
            return False
        nxt = self.ahead()
        return nxt.kind == "punct" and nxt.text in (",", ")")

    def parse_unary(self, scope: set) -> Callable:
        if self._operator_ref_here():
            ref = _OPERATOR_REFS[self.advance().text]

            def run(ctx, env):
                ctx.tick()
                return ref

            return run
        if self.current.kind == "op" and self.current.text == "-":
            self.advance()
            inner = self.parse_unary(scope)

            def run(ctx, env):
                ctx.tick()
                return -_need_int(inner(ctx, env))

            return run
        return self.parse_postfix(scope)

    def parse_postfix(self, scope: set) -> Callable:
        node = self.parse_atom(scope)
        while self.current.kind == "punct" and self.current.text in ("[", "("):
            if self.current.text == "[":
                self.advance()
                node = self.parse_index_or_slice(node, scope)
            else:
                args = tuple(self.parse_call_args(scope))
                node = self._make_call(node, args)
        return node

    @staticmethod
    def _make_call(fn_expr, args):
        def run(ctx, env):
            ctx.tick()
            fn = _need_callable(fn_expr(ctx, env))
            return fn(ctx, tuple(a(ctx, env) for a in args))

        return run

    def parse_index_or_slice(self, seq_expr, scope: set) -> Callable:
        low = None
        high = None
        is_slice = False
        if not (self.current.kind == "punct" and self.current.text == ":"):
            low = self.parse_expr(scope)
        if self.accept("punct", ":"):
            is_slice = True
            if not (self.current.kind == "punct" and self.current.text == "]"):
                high = self.parse_expr(scope)
        self.expect("punct", "]")

        if not is_slice:
            index_expr = low

            def run(ctx, env):
                ctx.tick()
                xs = _need_list(seq_expr(ctx, env))
                i = _need_int(index_expr(ctx, env))
                if not -len(xs) <= i < len(xs):
                    raise DslRuntimeError(f"index {i} outside list of {len(xs)}")
                return xs[i]

            return run

        def run(ctx, env):
            ctx.tick()
            xs = _need_list(seq_expr(ctx, env))
            lo = _need_int(low(ctx, env)) if low is not None else None
            hi = _need_int(high(ctx, env)) if high is not None else None
            result = xs[lo:hi]
            ctx.tick(len(result))
            return result

        return run

    def parse_atom(self, scope: set) -> Callable:
        token = self.current

        if token.kind == "num":
            self.advance()
            value = int(token.text)

            def run(ctx, env):
                ctx.tick()
                return value

            return run

        if token.kind == "punct" and token.text == "[":
            return self.parse_list_literal(scope)

        if token.kind == "punct" and token.text == "{":
            return self.parse_grid_literal()

        if token.kind == "punct" and token.text == "(":
            return self.parse_paren_or_entity(scope)

        if token.kind == "ident":
            return self.parse_ident(scope)

        raise self.error(f"expected an expression, found {token.text or 'end of input'!r}")

    def parse_list_literal(self, scope: set) -> Callable:
        self.expect("punct", "[")
        items = []
        if not self.accept("punct", "]"):
            items.append(self.parse_expr(scope))
            while self.accept("punct", ","):
                items.append(self.parse_expr(scope))
            self.expect("punct", "]")
        items_tuple = tuple(items)

        def run(ctx, env):
            ctx.tick(1 + len(items_tuple))
            return tuple(item(ctx, env) for item in items_tuple)

        return run

    def parse_grid_literal(self) -> Callable:
        self.expect("punct", "{")
        rows: List[Tuple[int, ...]] = []
        if not self.accept("punct", "}"):
            rows.append(self.parse_grid_row())
            while self.accept("punct", "|"):
                rows.append(self.parse_grid_row())
            self.expect("punct", "}")
        try:
            value = Grid(tuple(rows))
        except Exception as exc:
            raise self.error(str(exc))

        def run(ctx, env):
            ctx.tick()
            return value

        return run

    def parse_grid_row(self) -> Tuple[int, ...]:
        cells = [self.parse_grid_cell()]
        while self.accept("punct", ","):
            cells.append(self.parse_grid_cell())
        return tuple(cells)

    def parse_grid_cell(self) -> int:
        negative = False
        if self.current.kind == "op" and self.current.text == "-":
            self.advance()
            negative = True
        if self.current.kind != "num":
            raise self.error("expected an integer grid cell")
        value = int(self.advance().text)
        return -value if negative else value

    def parse_paren_or_entity(self, scope: set) -> Callable:
        self.expect("punct", "(")
        first = self.parse_expr(scope)
        if self.accept("punct", ","):
            second = self.parse_expr(scope)
            self.expect("punct", ",")
            third = self.parse_expr(scope)
            self.expect("punct", ")")
            entity_builtin = BUILTINS["entity"]

            def run(ctx, env):
                ctx.tick()
                return entity_builtin(
                    ctx, (first(ctx, env), second(ctx, env), third(ctx, env))
                )

            return run
        self.expect("punct", ")")
        return first

    def parse_ident(self, scope: set) -> Callable:
        token = self.advance()
        name = token.text

        if name == "on":
            return lambda ctx, env: (ctx.tick(), True)[1]
        if name == "off":
            return lambda ctx, env: (ctx.tick(), False)[1]
        if name == "null":
            return lambda ctx, env: (ctx.tick(), None)[1]
        if name == "undefined":
            def run(ctx, env):
                ctx.tick()
                raise UndefinedResult()
            return run
        if name in _KEYWORDS:
            self.index -= 1
            raise self.error(f"unexpected keyword {name!r}")

        if name in _SYMBOL_WORDS:
            symbol = _SYMBOL_WORDS[name]
            return lambda ctx, env: (ctx.tick(), symbol)[1]

        is_call = self.current.kind == "punct" and self.current.text == "("
        if name in BUILTINS:
            builtin = BUILTINS[name]
            if not is_call:
                return lambda ctx, env: (ctx.tick(), builtin)[1]
            args = self.parse_call_args(scope)
            if not (builtin.min_arity <= len(args) <= builtin.max_arity):
                raise DslParseError(
                    f"{name} expects {builtin.min_arity}"
                    + (f"..{builtin.max_arity}"
                       if builtin.max_arity != builtin.min_arity else "")
                    + f" arguments, got {len(args)}",
                    token.pos,
                )
            args_tuple = tuple(args)

            def run(ctx, env):
                ctx.tick()
                return builtin(ctx, tuple(a(ctx, env) for a in args_tuple))

            return run

        if name in scope:
            if is_call:
                args = tuple(self.parse_call_args(scope))

                def run(ctx, env):
                    ctx.tick()
                    fn = _need_callable(env[name])
                    return fn(ctx, tuple(a(ctx, env) for a in args))

                return run
            return lambda ctx, env: (ctx.tick(), env[name])[1]

        self.index -= 1
        raise self.error(f"unknown identifier {name!r}")

    def parse_call_args(self, scope: set) -> List[Callable]:
        self.expect("punct", "(")
        args = []
        if self.accept("punct", ")"):
            return args
        args.append(self.parse_expr(scope))
        while self.accept("punct", ","):
            args.append(self.parse_expr(scope))
        self.expect("punct", ")")
        return args


@dataclass(frozen=True)
class Program:
    """A parsed, compiled program; picklable via its source text."""

    source: str
    _compiled: Callable = field(repr=False, compare=False)

    def __reduce__(self):
        return (parse_program, (self.source,))


def parse_program(source: str) -> Program:
    """Parse DSL source into an executable program; the input is bound to x."""
    if not source.strip():
        raise DslParseError("empty program", 0)
    parser = _ProgramParser(source)
    compiled = parser.parse({"x"})
    return Program(source=source, _compiled=compiled)


def run_program(
    program: Program,
    value: Value,
    max_steps: int,
    time_limit: Optional[float] = None,
):
    """Evaluate the program on one input; raises the DSL exceptions on
    non-defined outcomes (callers map them to outcome statuses)."""
    deadline = time.monotonic() + time_limit if time_limit is not None else None
    ctx = _Ctx(max_steps, deadline)
    return program._compiled(ctx, {"x": value})
