"""Compilation gate and guarded execution for guest functions.

A loadable source is exactly one top-level ``def`` taking one argument, with
no imports anywhere in the tree; it executes under a builtins-only namespace
(no filesystem, network, eval/exec, or import machinery). Calls run under a
hard wall-clock timer enforced outside the guest code via SIGALRM.

This keeps honest guest code contained and verdicts reproducible. It is not
a security boundary against adversarial code (CPython attribute walks can
escape any in-process namespace restriction); run the worker inside an OS
sandbox when the source is untrusted.
"""

from __future__ import annotations

import ast
import builtins
import inspect
import signal
from typing import Callable, Optional

_ALLOWED_BUILTINS = (
    "abs", "all", "any", "bin", "bool", "bytearray", "bytes", "callable",
    "chr", "complex", "dict", "divmod", "enumerate", "filter", "float",
    "format", "frozenset", "hash", "hex", "int", "isinstance", "issubclass",
    "iter", "len", "list", "map", "max", "min", "next", "object", "oct",
    "ord", "pow", "print", "range", "repr", "reversed", "round", "set",
    "slice", "sorted", "str", "sum", "tuple", "zip",
    "ArithmeticError", "AssertionError", "AttributeError", "Exception",
    "IndexError", "KeyError", "LookupError", "OverflowError", "RuntimeError",
    "StopIteration", "TypeError", "ValueError", "ZeroDivisionError",
    "True", "False", "None",
)


def _safe_builtins() -> dict:
    table = {}
    for name in _ALLOWED_BUILTINS:
        if hasattr(builtins, name):
            table[name] = getattr(builtins, name)
    table["print"] = _silent_print
    return table


def _silent_print(*args, **kwargs):
    # prints must never corrupt the protocol stream
    return None


class CompileRejected(ValueError):
    pass


class CallTimeout(Exception):
    pass


def compile_guest(source: str) -> Callable:
    """Parse, vet, and execute a guest source; returns the function object."""
    try:
        tree = ast.parse(source)
    except (SyntaxError, ValueError) as exc:
        raise CompileRejected(f"syntax error: {exc}")
    for node in ast.walk(tree):
        if isinstance(node, (ast.Import, ast.ImportFrom)):
            raise CompileRejected("imports are not allowed")
    if len(tree.body) != 1 or not isinstance(tree.body[0], ast.FunctionDef):
        raise CompileRejected(
            "source must contain exactly one top-level def and nothing else"
        )
    namespace = {"__builtins__": _safe_builtins()}
    try:
        exec(compile(tree, "<guest>", "exec"), namespace)
    except Exception as exc:
        raise CompileRejected(f"definition failed: {exc}")
    fn = namespace.get(tree.body[0].name)
    if not callable(fn):
        raise CompileRejected("definition did not produce a function")
    try:
        inspect.signature(fn).bind(object())
    except TypeError:
        raise CompileRejected("function must accept exactly one argument")
    return fn


def _alarm_handler(signum, frame):
    raise CallTimeout()


def call_with_timeout(fn: Callable, argument, time_limit: Optional[float]):
    """Apply fn under a wall-clock budget; only usable from the main thread."""
    if time_limit is None:
        return fn(argument)
    previous = signal.signal(signal.SIGALRM, _alarm_handler)
    signal.setitimer(signal.ITIMER_REAL, time_limit)
    try:
        return fn(argument)
    finally:
        signal.setitimer(signal.ITIMER_REAL, 0)
        signal.signal(signal.SIGALRM, previous)
