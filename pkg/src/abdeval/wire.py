"""Client side of the guest-worker wire protocol.

The protocol is newline-delimited text over a byte stream (documented in
docs/wire-protocol.md). The worker announces itself with ``HELLO 1``; the
client then issues requests and reads one reply per request:

    LOAD <id> <nbytes>\\n<nbytes of source>\\n   ->  OK <id>
                                                 |  ERR <id> <kind> <message>
    CALL <id> <canonical input>\\n               ->  OK <id> <canonical output>
                                                 |  UNDEF <id>
                                                 |  ERR <id> <kind> <message>
                                                 |  TIMEOUT <id>

Values travel as canonical text, which never contains whitespace. Error
messages are single-line (newlines escaped as ``\\n``). Transport failures
(broken pipe, protocol desync, version mismatch) raise
:class:`~abdeval.executor.TransportError`, which is distinct from per-call
statuses: a call status is evidence about the hypothesis, a transport error
aborts the run.
"""

from __future__ import annotations

import subprocess
from typing import List, Optional, Sequence

from .executor import (
    DEFINED,
    Outcome,
    RESOURCE_EXCEEDED,
    RUNTIME_ERROR,
    TIMEOUT,
    TransportError,
    UNDEFINED,
)
from .values import Value, canonicalize

PROTOCOL_VERSION = "1"


class LoadError(RuntimeError):
    """The worker rejected a source at LOAD (maps to the bad-format verdict)."""

    def __init__(self, kind: str, message: str):
        super().__init__(f"{kind}: {message}")
        self.kind = kind


def escape_message(message: str) -> str:
    return message.replace("\\", "\\\\").replace("\n", "\\n").replace("\r", "\\r")


def unescape_message(message: str) -> str:
    out = []
    i = 0
    while i < len(message):
        ch = message[i]
        if ch == "\\" and i + 1 < len(message):
            nxt = message[i + 1]
            if nxt == "n":
                out.append("\n")
                i += 2
                continue
            if nxt == "r":
                out.append("\r")
                i += 2
                continue
            if nxt == "\\":
                out.append("\\")
                i += 2
                continue
        out.append(ch)
        i += 1
    return "".join(out)


class WorkerClient:
    """Drives one guest worker over its standard streams.

    One call is in flight at a time; the engine parallelizes by running a
    pool of clients, one process each.
    """

    def __init__(self, argv: Sequence[str]):
        self.argv = list(argv)
        try:
            self._proc = subprocess.Popen(
                self.argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
            )
        except OSError as exc:
            raise TransportError(f"failed to start worker: {exc}")
        greeting = self._read_line()
        parts = greeting.split()
        if len(parts) != 2 or parts[0] != "HELLO":
            raise TransportError(f"bad handshake: {greeting!r}")
        if parts[1] != PROTOCOL_VERSION:
            raise TransportError(
                f"protocol version mismatch: worker speaks {parts[1]}, "
                f"client speaks {PROTOCOL_VERSION}"
            )

    def _write(self, data: bytes) -> None:
        try:
            self._proc.stdin.write(data)
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise TransportError(f"worker pipe closed: {exc}")

    def _read_line(self) -> str:
        line = self._proc.stdout.readline()
        if not line:
            raise TransportError("worker closed the stream")
        return line.decode("utf-8").rstrip("\n")

    def _read_reply(self, expect_id: str) -> List[str]:
        parts = self._read_line().split(" ", 2)
        if len(parts) < 2:
            raise TransportError(f"malformed reply: {parts!r}")
        if parts[1] != expect_id:
            raise TransportError(
                f"reply id {parts[1]!r} does not echo request id {expect_id!r}"
            )
        return parts

    def load(self, program_id: str, source: str) -> None:
        """Compile a guest source under the given id; raises LoadError on
        rejection (syntax error, imports, extra defs)."""
        blob = source.encode("utf-8")
        self._write(f"LOAD {program_id} {len(blob)}\n".encode("utf-8"))
        self._write(blob + b"\n")
        parts = self._read_reply(program_id)
        if parts[0] == "OK":
            return
        if parts[0] == "ERR":
            kind, _, message = (parts[2] if len(parts) > 2 else "").partition(" ")
            raise LoadError(kind or "compile", unescape_message(message))
        raise TransportError(f"unexpected LOAD reply {parts[0]!r}")

    def call(self, program_id: str, value: Value) -> Outcome:
        """Apply a loaded program to one input."""
        self._write(f"CALL {program_id} {canonicalize(value)}\n".encode("utf-8"))
        parts = self._read_reply(program_id)
        tag = parts[0]
        if tag == "OK":
            if len(parts) < 3:
                raise TransportError("OK reply without a value")
            return Outcome(DEFINED, text=parts[2])
        if tag == "UNDEF":
            return Outcome(UNDEFINED)
        if tag == "TIMEOUT":
            return Outcome(TIMEOUT, detail="worker call timed out")
        if tag == "ERR":
            kind, _, message = (parts[2] if len(parts) > 2 else "").partition(" ")
            status = RESOURCE_EXCEEDED if kind in ("memory", "resource") else RUNTIME_ERROR
            return Outcome(status, detail=f"{kind}: {unescape_message(message)}")
        raise TransportError(f"unexpected CALL reply {tag!r}")

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self) -> "WorkerClient":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def load_external(argv: Sequence[str], program_id: str, source: str) -> WorkerClient:
    """Start a worker and load one program; returns the connected client."""
    client = WorkerClient(argv)
    try:
        client.load(program_id, source)
    except LoadError:
        client.close()
        raise
    return client
