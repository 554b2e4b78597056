"""Command-line entry points: `pubsub serve|client|conformance`."""

from __future__ import annotations

import argparse
import logging
import os
import signal
import socket
import sys
import threading
from typing import Mapping, Optional

from . import __version__, conformance
from .broker import Broker

DEFAULT_HOST = "127.0.0.1"
DEFAULT_PORT = 1234
PORT_ENV_VAR = "PUBSUB_PORT"

_LOG_LEVELS = {"quiet": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


def resolve_port(flag_value: Optional[int], env: Optional[Mapping[str, str]] = None) -> int:
    """Pick the port: an explicit flag wins, then $PUBSUB_PORT, then 1234.

    Raises ValueError if the environment value is not an integer.
    """
    if flag_value is not None:
        return flag_value
    environ = os.environ if env is None else env
    raw = environ.get(PORT_ENV_VAR)
    if raw is None:
        return DEFAULT_PORT
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"{PORT_ENV_VAR} must be an integer, got {raw!r}") from None


def _check_port(port: int, command: str) -> Optional[int]:
    if not 1 <= port <= 65535:
        print(f"pubsub {command}: port {port} out of range 1-65535", file=sys.stderr)
        return 2
    return None


def _configure_logging(level_name: str) -> None:
    logging.basicConfig(
        stream=sys.stderr,
        level=_LOG_LEVELS[level_name],
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
    )


def cmd_serve(args: argparse.Namespace) -> int:
    """Run the broker until SIGINT/SIGTERM; exit 2 on config/bind errors."""
    try:
        port = resolve_port(args.port)
    except ValueError as exc:
        print(f"pubsub serve: {exc}", file=sys.stderr)
        return 2
    failed = _check_port(port, "serve")
    if failed is not None:
        return failed
    if args.grace_period < 0:
        print("pubsub serve: grace period must be >= 0", file=sys.stderr)
        return 2
    _configure_logging(args.log_level)
    broker = Broker(host=args.host, port=port, grace_period=float(args.grace_period))
    try:
        broker.start()
    except OSError as exc:
        print(f"pubsub serve: cannot bind {args.host}:{port}: {exc}", file=sys.stderr)
        return 2
    stop = threading.Event()
    for signum in (signal.SIGINT, signal.SIGTERM):
        signal.signal(signum, lambda _signum, _frame: stop.set())
    stop.wait()
    broker.shutdown()
    return 0


def _forward_stdin(sock: socket.socket) -> None:
    """Forward stdin lines to the server; EOF just stops forwarding.

    The socket stays open so deliveries keep flowing until the server
    closes the session.
    """
    stdin = sys.stdin.buffer
    while True:
        line = stdin.readline()
        if line == b"":
            return
        if not line.endswith(b"\n"):
            line += b"\n"
        try:
            sock.sendall(line)
        except OSError:
            return


def cmd_client(args: argparse.Namespace) -> int:
    """Interactive line client: stdin to the server, server bytes to stdout."""
    try:
        port = resolve_port(args.port)
    except ValueError as exc:
        print(f"pubsub client: {exc}", file=sys.stderr)
        return 2
    failed = _check_port(port, "client")
    if failed is not None:
        return failed
    try:
        sock = socket.create_connection((args.host, port))
    except OSError as exc:
        print(f"pubsub client: cannot connect to {args.host}:{port}: {exc}", file=sys.stderr)
        return 1
    forwarder = threading.Thread(target=_forward_stdin, args=(sock,), daemon=True)
    forwarder.start()
    try:
        # Pass server bytes through verbatim so prompts (which carry no
        # line terminator) appear immediately.
        while True:
            chunk = sock.recv(4096)
            if not chunk:
                break
            sys.stdout.buffer.write(chunk)
            sys.stdout.buffer.flush()
    except (OSError, KeyboardInterrupt):
        pass
    finally:
        try:
            sock.close()
        except OSError:
            pass
    return 0


def cmd_conformance(args: argparse.Namespace) -> int:
    """Run the conformance checks; exit 0 iff every check passes."""
    results = conformance.run_all(seed=args.seed)
    print(conformance.format_report(results, seed=args.seed))
    return 0 if all(result.passed for result in results) else 1


def build_parser() -> argparse.ArgumentParser:
    version = f"%(prog)s {__version__}"
    parser = argparse.ArgumentParser(
        prog="pubsub",
        description="Topic-based publish/subscribe broker speaking a line-oriented TCP protocol.",
    )
    parser.add_argument("--version", action="version", version=version)
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    serve = sub.add_parser("serve", help="run the broker")
    serve.add_argument("--host", default=DEFAULT_HOST, help="bind address (default: %(default)s)")
    serve.add_argument(
        "--port",
        type=int,
        default=None,
        help=f"TCP port (default: ${PORT_ENV_VAR} or {DEFAULT_PORT})",
    )
    serve.add_argument(
        "--grace-period",
        type=int,
        default=5,
        help="seconds to let sessions drain on shutdown (default: %(default)s)",
    )
    serve.add_argument(
        "--log-level",
        choices=sorted(_LOG_LEVELS),
        default="info",
        help="stderr log verbosity (default: %(default)s)",
    )
    serve.add_argument("--version", action="version", version=version)
    serve.set_defaults(func=cmd_serve)

    client = sub.add_parser("client", help="connect interactively to a broker")
    client.add_argument("--host", default=DEFAULT_HOST, help="server address (default: %(default)s)")
    client.add_argument(
        "--port",
        type=int,
        default=None,
        help=f"TCP port (default: ${PORT_ENV_VAR} or {DEFAULT_PORT})",
    )
    client.add_argument("--version", action="version", version=version)
    client.set_defaults(func=cmd_client)

    conf = sub.add_parser("conformance", help="run the conformance checks")
    conf.add_argument("--seed", type=int, default=42, help="randomness seed (default: %(default)s)")
    conf.add_argument("--version", action="version", version=version)
    conf.set_defaults(func=cmd_conformance)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)
