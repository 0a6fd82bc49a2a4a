"""Driving the guest-language worker over the wire protocol.

Hypotheses written as plain single-def functions run in an isolated
subprocess behind a line-delimited protocol; this demo requires the worker
package (``pip install -e worker/``).
"""

import sys

from abdeval import Grid
from abdeval.wire import LoadError, WorkerClient

WORKER = [sys.executable, "-m", "guestexec", "--time-limit", "0.5"]

with WorkerClient(WORKER) as client:
    client.load(
        "pick6",
        "def f(x):\n"
        "    if 6 in x:\n"
        "        return [6]\n"
        "    return [0]",
    )
    for value in ((6, 1), (1, 2)):
        outcome = client.call("pick6", value)
        print(f"pick6{value!r} -> {outcome.status} {outcome.text}")

    client.load("rot", "def f(x):\n    return [list(r) for r in zip(*x[::-1])]")
    print("rotating a grid ->", client.call("rot", Grid(((1, 2), (3, 4)))).text)

    client.load("memo", "def f(x):\n    return {2: 20}.get(x)")
    print("declining an unseen input ->", client.call("memo", 3).status)

    client.load("spin", "def f(x):\n    while True:\n        pass")
    print("unbounded loop ->", client.call("spin", 0).status)

    try:
        client.load("bad", "import os\ndef f(x):\n    return x")
    except LoadError as exc:
        print(f"import-bearing source rejected at load: {exc}")
