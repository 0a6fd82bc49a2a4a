"""Entry point: speak the protocol on standard streams.

Re-executes itself once with PYTHONHASHSEED=0 so guest code that iterates
sets or dicts of strings behaves identically across sessions.
"""

from __future__ import annotations

import argparse
import os
import sys

from .server import Session


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="guestexec")
    parser.add_argument("--time-limit", type=float, default=1.0,
                        help="wall-clock budget per call in seconds")
    parser.add_argument("--memory-limit", type=int, default=None,
                        help="optional address-space cap in bytes")
    args = parser.parse_args(argv)

    if os.environ.get("PYTHONHASHSEED") != "0":
        env = dict(os.environ, PYTHONHASHSEED="0")
        os.execve(
            sys.executable,
            [sys.executable, "-m", "guestexec"] + (argv or sys.argv[1:]),
            env,
        )

    if args.memory_limit is not None:
        import resource

        resource.setrlimit(
            resource.RLIMIT_AS, (args.memory_limit, args.memory_limit)
        )

    session = Session(
        sys.stdin.buffer,
        sys.stdout.buffer,
        time_limit=args.time_limit,
    )
    session.serve()
    return 0


if __name__ == "__main__":
    sys.exit(main())
