"""Wire-protocol serve loop: LOAD/CALL requests on a byte stream.

One call is in flight at a time. Malformed requests are answered with ERR
and the loop continues at the next line; the process exits only at EOF.
Error messages travel on one line with newlines escaped as ``\\n``.
"""

from __future__ import annotations

from typing import BinaryIO, Dict, Optional

from .sandbox import CallTimeout, CompileRejected, call_with_timeout, compile_guest
from .values import CodecError, decode, encode, is_grid_text

PROTOCOL_VERSION = "1"


def escape_message(message: str) -> str:
    return message.replace("\\", "\\\\").replace("\n", "\\n").replace("\r", "\\r")


class Session:
    """Protocol state: loaded program table plus per-call limits."""

    def __init__(
        self,
        inp: BinaryIO,
        out: BinaryIO,
        time_limit: Optional[float] = 1.0,
    ):
        self.inp = inp
        self.out = out
        self.time_limit = time_limit
        self.programs: Dict[str, object] = {}

    def send(self, text: str) -> None:
        self.out.write((text + "\n").encode("utf-8"))
        self.out.flush()

    def serve(self) -> None:
        self.send(f"HELLO {PROTOCOL_VERSION}")
        while True:
            line = self.inp.readline()
            if not line:
                return
            try:
                text = line.decode("utf-8").rstrip("\n")
            except UnicodeDecodeError:
                self.send("ERR - protocol undecodable request line")
                continue
            if not text.strip():
                continue
            parts = text.split(" ", 2)
            if parts[0] == "LOAD":
                self.handle_load(parts)
            elif parts[0] == "CALL":
                self.handle_call(parts)
            else:
                self.send(f"ERR - protocol unknown request {escape_message(parts[0])}")

    def handle_load(self, parts) -> None:
        if len(parts) != 3:
            self.send("ERR - protocol LOAD needs id and byte count")
            return
        program_id = parts[1]
        try:
            nbytes = int(parts[2])
            if nbytes < 0:
                raise ValueError
        except ValueError:
            self.send(f"ERR {program_id} protocol bad byte count")
            return
        blob = self.inp.read(nbytes)
        if len(blob) != nbytes:
            self.send(f"ERR {program_id} protocol truncated source")
            return
        self.inp.read(1)    # trailing newline
        try:
            source = blob.decode("utf-8")
        except UnicodeDecodeError:
            self.send(f"ERR {program_id} compile source is not UTF-8")
            return
        try:
            self.programs[program_id] = compile_guest(source)
        except CompileRejected as exc:
            self.send(f"ERR {program_id} compile {escape_message(str(exc))}")
            return
        self.send(f"OK {program_id}")

    def handle_call(self, parts) -> None:
        if len(parts) != 3:
            self.send("ERR - protocol CALL needs id and input")
            return
        program_id, text = parts[1], parts[2]
        fn = self.programs.get(program_id)
        if fn is None:
            self.send(f"ERR {program_id} protocol unknown id")
            return
        try:
            value = decode(text)
        except CodecError as exc:
            self.send(f"ERR {program_id} protocol {escape_message(str(exc))}")
            return
        try:
            result = call_with_timeout(fn, value, self.time_limit)
        except CallTimeout:
            self.send(f"TIMEOUT {program_id}")
            return
        except MemoryError:
            self.send(f"ERR {program_id} memory allocation failed in guest call")
            return
        except RecursionError:
            self.send(f"ERR {program_id} resource recursion depth exhausted")
            return
        except BaseException as exc:
            kind = type(exc).__name__
            self.send(
                f"ERR {program_id} runtime {escape_message(f'{kind}: {exc}')}"
            )
            return
        if result is None:
            self.send(f"UNDEF {program_id}")
            return
        try:
            encoded = encode(result, grid_context=is_grid_text(text))
        except (CodecError, RecursionError) as exc:
            self.send(f"ERR {program_id} encoding {escape_message(str(exc))}")
            return
        self.send(f"OK {program_id} {encoded}")
