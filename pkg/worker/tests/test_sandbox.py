import time

import pytest

from guestexec.sandbox import (
    CallTimeout,
    CompileRejected,
    call_with_timeout,
    compile_guest,
)

TEMPLATE_EXAMPLE = (
    "def f(x):\n"
    "    if 6 in x:\n"
    "        return [6]\n"
    "    return [0]"
)


def test_single_def_compiles_and_runs():
    fn = compile_guest(TEMPLATE_EXAMPLE)
    assert fn([6, 1]) == [6]
    assert fn([1, 2]) == [0]


def test_two_defs_rejected():
    source = "def f(x):\n    return x\n\ndef g(x):\n    return x"
    with pytest.raises(CompileRejected):
        compile_guest(source)


def test_trailing_statements_rejected():
    with pytest.raises(CompileRejected):
        compile_guest("def f(x):\n    return x\n\nprint(f(1))")


def test_imports_rejected_anywhere():
    with pytest.raises(CompileRejected) as err:
        compile_guest("import os\ndef f(x):\n    return x")
    assert "import" in str(err.value)
    with pytest.raises(CompileRejected):
        compile_guest("def f(x):\n    import os\n    return x")
    with pytest.raises(CompileRejected):
        compile_guest("def f(x):\n    from math import sqrt\n    return x")


def test_syntax_error_rejected():
    with pytest.raises(CompileRejected):
        compile_guest("def f(x)\n    return x")


def test_wrong_arity_rejected():
    with pytest.raises(CompileRejected):
        compile_guest("def f(x, y):\n    return x")
    with pytest.raises(CompileRejected):
        compile_guest("def f():\n    return 1")


def test_defaulted_extra_args_allowed():
    fn = compile_guest("def f(x, scale=2):\n    return x * scale")
    assert fn(3) == 6


def test_builtins_only_namespace():
    fn = compile_guest("def f(x):\n    return sorted(set(x))")
    assert fn([3, 1, 3]) == [1, 3]
    no_open = compile_guest("def f(x):\n    return open('/etc/passwd')")
    with pytest.raises(NameError):
        no_open("ignored")
    no_eval = compile_guest("def f(x):\n    return eval('1')")
    with pytest.raises(NameError):
        no_eval("ignored")


def test_print_is_silenced(capsys):
    fn = compile_guest("def f(x):\n    print('noise')\n    return x")
    assert fn(1) == 1
    assert capsys.readouterr().out == ""


def test_timeout_interrupts_unbounded_loop():
    fn = compile_guest("def f(x):\n    while True:\n        x = x + 1\n    return x")
    start = time.monotonic()
    with pytest.raises(CallTimeout):
        call_with_timeout(fn, 0, 0.2)
    assert time.monotonic() - start < 2.0


def test_timer_cleared_after_success():
    fn = compile_guest("def f(x):\n    return x + 1")
    assert call_with_timeout(fn, 1, 0.5) == 2
    time.sleep(0.6)     # a leaked timer would fire here
