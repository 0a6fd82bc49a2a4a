"""Guest-function execution worker.

Compiles and runs single-def guest functions behind the evaluation engine's
line-delimited wire protocol, with per-call wall-clock timeouts and a
builtins-only namespace. Launched as a subprocess with the protocol on
standard streams: ``python -m guestexec [--time-limit S] [--memory-limit B]``.
"""

__version__ = "0.1.0"

from .sandbox import CallTimeout, CompileRejected, compile_guest
from .server import PROTOCOL_VERSION, Session
from .values import CodecError, decode, encode

__all__ = [
    "CallTimeout",
    "CompileRejected",
    "compile_guest",
    "PROTOCOL_VERSION",
    "Session",
    "CodecError",
    "decode",
    "encode",
]
