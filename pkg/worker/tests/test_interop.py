"""End-to-end interop: the engine's wire client driving this worker."""

import sys

import pytest

abdeval = pytest.importorskip("abdeval", reason="engine not installed")

from abdeval.executor import DEFINED, TIMEOUT, UNDEFINED  # noqa: E402
from abdeval.values import Entity, Grid, parse_value  # noqa: E402
from abdeval.wire import LoadError, WorkerClient, load_external  # noqa: E402

WORKER = [sys.executable, "-m", "guestexec", "--time-limit", "0.5"]

TEMPLATE_EXAMPLE = (
    "def f(x):\n"
    "    if 6 in x:\n"
    "        return [6]\n"
    "    return [0]"
)


def test_client_drives_worker_end_to_end():
    with WorkerClient(WORKER) as client:
        client.load("ex", TEMPLATE_EXAMPLE)
        outcome = client.call("ex", (6, 1))
        assert outcome.status == DEFINED
        assert parse_value(outcome.text) == (6,)
        assert client.call("ex", (1, 2)).text == "[0]"


def test_load_error_maps_to_bad_format_path():
    with pytest.raises(LoadError) as err:
        load_external(WORKER, "bad", "import os\ndef f(x):\n    return x")
    assert err.value.kind == "compile"


def test_statuses_across_the_wire():
    with WorkerClient(WORKER) as client:
        client.load("memo", "def f(x):\n    return {2: 20}.get(x)")
        assert client.call("memo", 2).text == "20"
        assert client.call("memo", 3).status == UNDEFINED
        client.load("spin", "def f(x):\n    while True:\n        pass")
        assert client.call("spin", 0).status == TIMEOUT


def test_structured_values_cross_the_boundary():
    with WorkerClient(WORKER) as client:
        client.load("rot", "def f(x):\n    return [list(r) for r in zip(*x[::-1])]")
        outcome = client.call("rot", Grid(((1, 2), (3, 4))))
        assert parse_value(outcome.text) == Grid(((3, 1), (4, 2)))

        client.load(
            "pick",
            "def f(x):\n    return [e for e in x if e[2] == 'metal']",
        )
        outcome = client.call(
            "pick",
            (Entity("red", "cube", "metal"), Entity("blue", "cube", "rubber")),
        )
        assert parse_value(outcome.text) == (Entity("red", "cube", "metal"),)


def test_worker_outcomes_are_reproducible_between_sessions():
    def run_once():
        with WorkerClient(WORKER) as client:
            client.load("s", "def f(x):\n    return sorted(set(x))")
            return [client.call("s", (3, 1, 2, 3)).text for _ in range(3)]

    assert run_once() == run_once()
