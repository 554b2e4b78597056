"""TCP broker: accept connections, run one session per client.

Layering:

* ``Outbox``: bounded FIFO of outbound payloads for one connection.
  Broadcast enqueues here; a per-connection writer thread drains onto
  the socket, so a slow subscriber never stalls anyone else.
* ``BrokerState``: the shared mutable state (subscription table plus
  outbox registry). Every read and mutation happens under one lock, and
  the table itself is an immutable value from :mod:`pubsub.core`, so any
  observable table equals the fold of the operations applied so far.
* ``run_session``: the per-client loop: greet, read lines, dispatch
  commands, clean up exactly once on any exit path.
* ``Broker``: the TCP host: listener, acceptor thread, one session
  thread per client, shutdown with a drain grace period.
"""

from __future__ import annotations

import logging
import queue
import socket
import threading
import time
from dataclasses import dataclass
from typing import Callable, Optional

from . import core, protocol
from .core import ConnectionId, SubscriptionTable
from .protocol import DeliveryLine, ParseError, Publish, Quit, Subscribe, Unsubscribe

log = logging.getLogger("pubsub.broker")

DEFAULT_OUTBOX_LIMIT = 1024
DEFAULT_GRACE_PERIOD = 5.0

# How long a session waits for its writer to flush before forcing the
# socket closed.
_DRAIN_TIMEOUT = 5.0

# Upper bound on one inbound line; longer input is processed in chunks.
_MAX_LINE_BYTES = 1 << 20

_CLOSE = object()

OpRecord = tuple
"""Journal entry: ("subscribe", ch, conn), ("unsubscribe", ch, conn) or
("release", conn)."""


class Outbox:
    """Bounded FIFO of outbound byte payloads for one connection.

    ``send`` never blocks: a full queue means the subscriber cannot keep
    up, and the policy is to forcibly disconnect it (``on_kill`` fires,
    normal session cleanup follows). After close/kill, sends report
    failure instead of raising.
    """

    def __init__(self, limit: int = DEFAULT_OUTBOX_LIMIT, on_kill: Optional[Callable[[], None]] = None):
        self._queue: queue.Queue = queue.Queue(maxsize=limit)
        self._lock = threading.Lock()
        self._closed = False
        self._killed = False
        self.on_kill = on_kill

    @property
    def closed(self) -> bool:
        return self._closed

    def pending(self) -> int:
        """Approximate number of queued payloads (diagnostics only)."""
        return self._queue.qsize()

    def send(self, payload: bytes) -> bool:
        """Enqueue a payload; False if the outbox is closed or overflows."""
        with self._lock:
            if self._closed:
                return False
            try:
                self._queue.put_nowait(payload)
                return True
            except queue.Full:
                killed_now = self._kill_locked()
        if killed_now:
            self._fire_on_kill()
        return False

    def close(self) -> None:
        """Stop accepting sends; already-queued payloads still drain."""
        with self._lock:
            if self._closed:
                return
            self._closed = True
            self._put_sentinel_locked()

    def kill(self) -> None:
        """Close and discard queued payloads (forced disconnect)."""
        with self._lock:
            killed_now = self._kill_locked()
        if killed_now:
            self._fire_on_kill()

    def take(self) -> Optional[bytes]:
        """Blocking dequeue; None once the outbox is finished."""
        item = self._queue.get()
        if item is _CLOSE:
            return None
        return item

    def _kill_locked(self) -> bool:
        if self._killed:
            return False
        self._closed = True
        self._killed = True
        while True:
            try:
                self._queue.get_nowait()
            except queue.Empty:
                break
        self._put_sentinel_locked()
        return True

    def _put_sentinel_locked(self) -> None:
        # Make room if necessary so the sentinel always lands.
        while True:
            try:
                self._queue.put_nowait(_CLOSE)
                return
            except queue.Full:
                try:
                    self._queue.get_nowait()
                except queue.Empty:
                    pass

    def _fire_on_kill(self) -> None:
        callback = self.on_kill
        if callback is None:
            return
        try:
            callback()
        except Exception:
            log.exception("outbox on_kill callback failed")


@dataclass(frozen=True)
class CommandOutcome:
    """What one command did: success flag, detail text, delivery counts."""

    ok: bool
    detail: str
    session_ended: bool = False
    deliveries_attempted: int = 0
    deliveries_failed: int = 0


class BrokerState:
    """Shared broker state: the live subscription table plus outboxes.

    All access goes through one lock. Mutations replace the table with
    the result of a pure :mod:`pubsub.core` operation, so the table seen
    by ``table_snapshot`` is always the fold of a linearization of those
    operations. With ``record_ops=True`` the applied operations are
    journaled, which lets tests replay the observed linearization
    through the pure core and compare.
    """

    def __init__(self, outbox_limit: int = DEFAULT_OUTBOX_LIMIT, record_ops: bool = False):
        self._lock = threading.Lock()
        self._table: SubscriptionTable = core.EMPTY_TABLE
        self._next_id = 0
        self._outbox_limit = outbox_limit
        self._outboxes: dict[ConnectionId, Outbox] = {}
        self._ops: Optional[list[OpRecord]] = [] if record_ops else None

    def register(self, label: str = "") -> tuple[ConnectionId, Outbox]:
        """Assign a fresh ConnectionId and create its outbox."""
        with self._lock:
            conn = ConnectionId(self._next_id, label)
            self._next_id += 1
            outbox = Outbox(self._outbox_limit)
            self._outboxes[conn] = outbox
            return conn, outbox

    def release(self, conn: ConnectionId) -> None:
        """Session teardown: drop the connection's entries and outbox.

        Idempotent; the outbox is closed so its writer drains and stops.
        """
        with self._lock:
            outbox = self._outboxes.pop(conn, None)
            self._table = core.remove_by_connection(conn, self._table)
            self._record(("release", conn))
        if outbox is not None:
            outbox.close()

    def handle_command(self, cmd: protocol.Command, conn: ConnectionId) -> CommandOutcome:
        """Apply one parsed command for `conn` and report the outcome."""
        if isinstance(cmd, Subscribe):
            with self._lock:
                already = core.contains_subscription(cmd.channel, conn, self._table)
                self._table = core.subscribe(cmd.channel, conn, self._table)
                self._record(("subscribe", cmd.channel, conn))
            if already:
                return CommandOutcome(ok=False, detail="already subscribed")
            return CommandOutcome(ok=True, detail=f"subscribed {cmd.channel}")

        if isinstance(cmd, Unsubscribe):
            with self._lock:
                present = core.contains_subscription(cmd.channel, conn, self._table)
                self._table = core.unsubscribe(cmd.channel, conn, self._table)
                self._record(("unsubscribe", cmd.channel, conn))
            if not present:
                return CommandOutcome(ok=False, detail="not subscribed")
            return CommandOutcome(ok=True, detail=f"unsubscribed {cmd.channel}")

        if isinstance(cmd, Publish):
            line = protocol.format_delivery(DeliveryLine(cmd.channel, cmd.message))
            payload = (line + "\n").encode("utf-8")
            # Matched set and enqueues happen under the lock, which is
            # what gives each subscriber publication-order FIFO. Socket
            # writes happen in the writer threads, outside the lock.
            with self._lock:
                matched = core.handles_by_channel(cmd.channel, self._table)
                results = core.publish_with(
                    lambda c: self._deliver_locked(c, payload), matched
                )
            failed = sum(1 for delivered in results if not delivered)
            return CommandOutcome(
                ok=True,
                detail=f"delivered {len(matched) - failed}",
                deliveries_attempted=len(matched),
                deliveries_failed=failed,
            )

        if isinstance(cmd, Quit):
            with self._lock:
                self._table = core.remove_by_connection(conn, self._table)
                self._record(("release", conn))
            return CommandOutcome(ok=True, detail="bye", session_ended=True)

        raise TypeError(f"not a command: {cmd!r}")

    def table_snapshot(self) -> SubscriptionTable:
        """Point-in-time copy of the table (it is an immutable value)."""
        with self._lock:
            return self._table

    def op_log(self) -> list[OpRecord]:
        """Copy of the journal; requires record_ops=True."""
        with self._lock:
            if self._ops is None:
                raise RuntimeError("operation recording is disabled")
            return list(self._ops)

    def snapshot_with_ops(self) -> tuple[SubscriptionTable, list[OpRecord]]:
        """Atomically paired (table, journal) for linearizability checks."""
        with self._lock:
            if self._ops is None:
                raise RuntimeError("operation recording is disabled")
            return self._table, list(self._ops)

    def connection_count(self) -> int:
        with self._lock:
            return len(self._outboxes)

    def _deliver_locked(self, conn: ConnectionId, payload: bytes) -> bool:
        # Failure isolation for broadcasts: a dead or overflowing outbox
        # becomes a recorded False, never an exception, so the strict
        # traversal in core.publish_with cannot abort mid-broadcast.
        outbox = self._outboxes.get(conn)
        if outbox is None:
            return False
        return outbox.send(payload)

    def _record(self, op: OpRecord) -> None:
        if self._ops is not None:
            self._ops.append(op)


def _peer_label(sock: socket.socket) -> str:
    try:
        peer = sock.getpeername()
    except OSError:
        return "local"
    if isinstance(peer, tuple) and len(peer) >= 2:
        return f"{peer[0]}:{peer[1]}"
    return str(peer) or "local"


def _shutdown_socket(sock: socket.socket) -> None:
    try:
        sock.shutdown(socket.SHUT_RDWR)
    except OSError:
        pass


def _decode_line(raw: bytes) -> str:
    """Strip one trailing LF and one optional CR before it, then decode."""
    if raw.endswith(b"\n"):
        raw = raw[:-1]
        if raw.endswith(b"\r"):
            raw = raw[:-1]
    return raw.decode("utf-8", errors="replace")


def _write_outbox(sock: socket.socket, outbox: Outbox) -> None:
    """Writer loop: drain one outbox onto its socket until finished."""
    while True:
        payload = outbox.take()
        if payload is None:
            return
        try:
            sock.sendall(payload)
        except OSError:
            outbox.kill()
            # Unblock the reader so the session runs its cleanup.
            _shutdown_socket(sock)
            return


def run_session(sock: socket.socket, state: BrokerState, label: str = "") -> None:
    """Drive one client session over a connected socket until it ends.

    Registers a fresh connection, sends the greeting and prompt, then
    loops: read line, parse, dispatch, respond. The session ends on
    quit, end-of-input, or a transport error; all paths run the same
    cleanup exactly once (entries removed, outbox drained and closed,
    socket closed).
    """
    conn, outbox = state.register(label or _peer_label(sock))
    outbox.on_kill = lambda: _shutdown_socket(sock)
    log.info("session %s open", conn)
    writer = threading.Thread(
        target=_write_outbox,
        args=(sock, outbox),
        name=f"pubsub-writer-{conn.id}",
        daemon=True,
    )
    writer.start()
    reader = sock.makefile("rb")
    try:
        for text in protocol.greeting():
            outbox.send((text + "\n").encode("utf-8"))
        outbox.send(protocol.PROMPT.encode("utf-8"))
        while True:
            raw = reader.readline(_MAX_LINE_BYTES)
            if raw == b"":
                break
            cmd = protocol.parse_command(_decode_line(raw))
            if isinstance(cmd, ParseError):
                log.debug("session %s rejected line: %s", conn, cmd.kind.value)
                response = protocol.format_response(False, cmd.kind.value)
                outbox.send((response + "\n").encode("utf-8"))
                outbox.send(protocol.PROMPT.encode("utf-8"))
                continue
            outcome = state.handle_command(cmd, conn)
            log.debug(
                "session %s %s -> ok=%s %s",
                conn,
                type(cmd).__name__.lower(),
                outcome.ok,
                outcome.detail,
            )
            response = protocol.format_response(outcome.ok, outcome.detail)
            outbox.send((response + "\n").encode("utf-8"))
            if outcome.session_ended:
                break
            outbox.send(protocol.PROMPT.encode("utf-8"))
    except OSError:
        pass  # transport error: fall through to the shared cleanup path
    finally:
        state.release(conn)
        try:
            reader.close()
        except OSError:
            pass
        # release() closed the outbox, so the writer flushes whatever is
        # queued (e.g. the quit response) and exits; force the socket
        # down if it cannot.
        writer.join(timeout=_DRAIN_TIMEOUT)
        _shutdown_socket(sock)
        writer.join(timeout=1.0)
        try:
            sock.close()
        except OSError:
            pass
        log.info("session %s closed", conn)


class Broker:
    """TCP host: one acceptor thread plus one session thread per client.

    ``port=0`` binds an ephemeral port; read ``address`` after
    ``start()``. Usable as a context manager in tests.
    """

    def __init__(
        self,
        host: str = "127.0.0.1",
        port: int = 0,
        outbox_limit: int = DEFAULT_OUTBOX_LIMIT,
        grace_period: float = DEFAULT_GRACE_PERIOD,
        record_ops: bool = False,
    ):
        self.state = BrokerState(outbox_limit=outbox_limit, record_ops=record_ops)
        self._host = host
        self._port = port
        self._grace = grace_period
        self._listener: Optional[socket.socket] = None
        self._acceptor: Optional[threading.Thread] = None
        self._stopping = threading.Event()
        self._sessions_lock = threading.Lock()
        self._sessions: dict[int, tuple[threading.Thread, socket.socket]] = {}
        self._session_seq = 0
        self._address: Optional[tuple[str, int]] = None

    @property
    def address(self) -> tuple[str, int]:
        if self._address is None:
            raise RuntimeError("broker is not started")
        return self._address

    def start(self) -> None:
        """Bind, listen, and start accepting in a background thread."""
        if self._listener is not None:
            raise RuntimeError("broker already started")
        self._listener = socket.create_server((self._host, self._port))
        self._address = self._listener.getsockname()[:2]
        self._acceptor = threading.Thread(
            target=self._accept_loop, name="pubsub-acceptor", daemon=True
        )
        self._acceptor.start()
        log.info("listening on %s:%d", *self.address)

    def serve_forever(self) -> None:
        """start() if needed, then block until shutdown() is called."""
        if self._listener is None:
            self.start()
        self._stopping.wait()

    def shutdown(self, grace_period: Optional[float] = None) -> None:
        """Stop accepting, drain in-flight sessions, then force-close.

        Sessions get `grace_period` seconds (default: the broker's) to
        finish on their own before their sockets are shut down.
        """
        grace = self._grace if grace_period is None else grace_period
        self._stopping.set()
        if self._listener is not None:
            # shutdown() before close(): close alone does not wake a
            # thread blocked in accept(), and the kernel would keep the
            # listening socket alive until that accept returned.
            try:
                self._listener.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            try:
                self._listener.close()
            except OSError:
                pass
        if self._acceptor is not None:
            self._acceptor.join(timeout=2.0)
        deadline = time.monotonic() + grace
        with self._sessions_lock:
            sessions = list(self._sessions.values())
        for thread, _sock in sessions:
            thread.join(timeout=max(0.0, deadline - time.monotonic()))
        for thread, sock in sessions:
            if thread.is_alive():
                _shutdown_socket(sock)
        for thread, _sock in sessions:
            thread.join(timeout=2.0)
        log.info("broker stopped")

    def table_snapshot(self) -> SubscriptionTable:
        return self.state.table_snapshot()

    def __enter__(self) -> "Broker":
        if self._listener is None:
            self.start()
        return self

    def __exit__(self, *exc_info) -> None:
        self.shutdown()

    def _accept_loop(self) -> None:
        assert self._listener is not None
        while not self._stopping.is_set():
            try:
                sock, addr = self._listener.accept()
            except OSError:
                if self._stopping.is_set():
                    break
                log.warning("accept failed; continuing", exc_info=True)
                continue
            with self._sessions_lock:
                key = self._session_seq
                self._session_seq += 1
                thread = threading.Thread(
                    target=self._session_main,
                    args=(key, sock, addr),
                    name=f"pubsub-session-{key}",
                    daemon=True,
                )
                self._sessions[key] = (thread, sock)
            thread.start()

    def _session_main(self, key: int, sock: socket.socket, addr) -> None:
        label = f"{addr[0]}:{addr[1]}" if isinstance(addr, tuple) else str(addr)
        try:
            run_session(sock, self.state, label=label)
        except Exception:
            log.exception("session %s crashed", label)
        finally:
            with self._sessions_lock:
                self._sessions.pop(key, None)
