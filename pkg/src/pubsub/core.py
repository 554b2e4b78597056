"""Pure operations on the subscription table.

The table is an ordered, immutable sequence of (channel, connection)
entries. Every operation returns a new value; nothing here performs I/O
or touches shared state, so all of it is trivially safe to call from any
thread.

Connections are deliberately generic: any value with equality works
(the broker uses :class:`ConnectionId`, the conformance checks use plain
strings).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, TypeVar

_RESERVED_CHARS = frozenset(" \t\r\n")

R = TypeVar("R")


@dataclass(frozen=True)
class Channel:
    """Opaque topic token, compared by exact text equality ("01" != "1")."""

    token: str

    def __post_init__(self) -> None:
        if not self.token:
            raise ValueError("channel token must be non-empty")
        if _RESERVED_CHARS & set(self.token):
            raise ValueError(
                f"channel token may not contain space, tab, CR, or LF: {self.token!r}"
            )

    def __str__(self) -> str:
        return self.token


@dataclass(frozen=True)
class ConnectionId:
    """Identity of one client session, decoupled from its transport handle.

    Equality and hashing use the numeric id only; the label is a
    human-readable tag for logs and tests.
    """

    id: int
    label: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if self.id < 0:
            raise ValueError("connection id must be non-negative")

    def __str__(self) -> str:
        return self.label or f"conn-{self.id}"


@dataclass(frozen=True)
class SubscriptionEntry:
    """One subscription: a channel paired with a connection."""

    channel: Channel
    connection: Any


SubscriptionTable = tuple[SubscriptionEntry, ...]

EMPTY_TABLE: SubscriptionTable = ()


def handles_by_channel(channel: Channel, table: SubscriptionTable) -> SubscriptionTable:
    """Entries subscribed to `channel`, in their original relative order."""
    return tuple(entry for entry in table if entry.channel == channel)


def remove_by_connection(connection: Any, table: SubscriptionTable) -> SubscriptionTable:
    """Drop every entry held by `connection` (session teardown)."""
    return tuple(entry for entry in table if entry.connection != connection)


def remove_subscription(
    channel: Channel, connection: Any, table: SubscriptionTable
) -> SubscriptionTable:
    """Drop every entry equal to (channel, connection), duplicates included."""
    return tuple(
        entry
        for entry in table
        if not (entry.channel == channel and entry.connection == connection)
    )


def add_subscription(
    channel: Channel, connection: Any, table: SubscriptionTable
) -> SubscriptionTable:
    """Prepend (channel, connection) unconditionally.

    No duplicate check happens at this level; `subscribe` is the
    duplicate-free layer.
    """
    return (SubscriptionEntry(channel, connection),) + tuple(table)


def contains_subscription(
    channel: Channel, connection: Any, table: SubscriptionTable
) -> bool:
    """True iff some entry equals (channel, connection)."""
    return any(
        entry.channel == channel and entry.connection == connection for entry in table
    )


def subscribe(
    channel: Channel, connection: Any, table: SubscriptionTable
) -> SubscriptionTable:
    """Add the pair unless it is already present (idempotent)."""
    if not contains_subscription(channel, connection, table):
        return add_subscription(channel, connection, table)
    return table


def unsubscribe(
    channel: Channel, connection: Any, table: SubscriptionTable
) -> SubscriptionTable:
    """Remove the pair if present; otherwise return the table unchanged."""
    if contains_subscription(channel, connection, table):
        return remove_subscription(channel, connection, table)
    return table


def publish_with(deliver: Callable[[Any], R], table: SubscriptionTable) -> list[R]:
    """Apply `deliver` to each entry's connection, in table order.

    Results are collected in order. The traversal is strict: the first
    exception raised by `deliver` propagates immediately and no further
    entries are visited. Callers wanting per-recipient failure isolation
    must wrap `deliver` so it returns a value instead of raising (the
    broker's broadcast does exactly that). Pre-filtering by channel is
    the caller's job, via `handles_by_channel`.
    """
    return [deliver(entry.connection) for entry in table]
