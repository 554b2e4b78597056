"""Unit and property tests for the pure subscription-table operations."""

import random

import pytest
from hypothesis import given, strategies as st

from pubsub.core import (
    EMPTY_TABLE,
    Channel,
    ConnectionId,
    SubscriptionEntry,
    add_subscription,
    contains_subscription,
    handles_by_channel,
    publish_with,
    remove_by_connection,
    remove_subscription,
    subscribe,
    unsubscribe,
)

C1 = ConnectionId(1, "c1")
C2 = ConnectionId(2, "c2")
C3 = ConnectionId(3, "c3")
C9 = ConnectionId(9, "c9")


def entry(channel: str, connection) -> SubscriptionEntry:
    return SubscriptionEntry(Channel(channel), connection)


def table(*pairs) -> tuple:
    return tuple(entry(channel, connection) for channel, connection in pairs)


# --- Naive scan oracles, local to this file on purpose --------------------


def scan_matching(channel, tab):
    out = []
    for e in tab:
        if e.channel == channel:
            out.append(e)
    return tuple(out)


def scan_without_connection(connection, tab):
    out = []
    for e in tab:
        if e.connection != connection:
            out.append(e)
    return tuple(out)


def scan_without_pair(channel, connection, tab):
    out = []
    for e in tab:
        if not (e.channel == channel and e.connection == connection):
            out.append(e)
    return tuple(out)


def scan_member(channel, connection, tab):
    for e in tab:
        if e.channel == channel and e.connection == connection:
            return True
    return False


def scan_subscribe(channel, connection, tab):
    if scan_member(channel, connection, tab):
        return tuple(tab)
    return (SubscriptionEntry(channel, connection),) + tuple(tab)


def scan_unsubscribe(channel, connection, tab):
    if scan_member(channel, connection, tab):
        return scan_without_pair(channel, connection, tab)
    return tuple(tab)


# --- Domain types ----------------------------------------------------------


class TestTypes:
    def test_channel_equality_is_textual(self):
        assert Channel("1") == Channel("1")
        assert Channel("01") != Channel("1")

    @pytest.mark.parametrize("bad", ["", "a b", "a\tb", "a\rb", "a\nb", " "])
    def test_channel_rejects_reserved_tokens(self, bad):
        with pytest.raises(ValueError):
            Channel(bad)

    def test_connection_equality_by_id_only(self):
        assert ConnectionId(3, "x") == ConnectionId(3, "y")
        assert ConnectionId(3) != ConnectionId(4)
        assert hash(ConnectionId(3, "x")) == hash(ConnectionId(3, "y"))

    def test_connection_rejects_negative_id(self):
        with pytest.raises(ValueError):
            ConnectionId(-1)

    def test_entry_is_immutable(self):
        e = entry("1", C1)
        with pytest.raises(AttributeError):
            e.channel = Channel("2")


# --- handles_by_channel -----------------------------------------------------


class TestHandlesByChannel:
    def test_single_match(self):
        subs = table(("1", "fh01"))
        assert handles_by_channel(Channel("1"), subs) == subs
        assert len(handles_by_channel(Channel("1"), subs)) == 1

    def test_no_match(self):
        assert handles_by_channel(Channel("2"), table(("1", "fh01"))) == ()

    def test_empty_table(self):
        assert handles_by_channel(Channel("z"), EMPTY_TABLE) == ()

    def test_keeps_matches_in_order(self):
        tab = table(("a", C1), ("b", C2), ("a", C3))
        assert handles_by_channel(Channel("a"), tab) == table(("a", C1), ("a", C3))

    def test_input_not_modified(self):
        tab = table(("a", C1), ("b", C2))
        before = tuple(tab)
        handles_by_channel(Channel("a"), tab)
        assert tab == before


# --- remove_by_connection ----------------------------------------------------


class TestRemoveByConnection:
    def test_removes_every_entry_of_connection(self):
        tab = table(("1", C1), ("2", C1), ("1", C2))
        assert remove_by_connection(C1, tab) == table(("1", C2))

    def test_empty_table(self):
        assert remove_by_connection(C1, EMPTY_TABLE) == ()

    def test_absent_connection_is_identity(self):
        tab = table(("1", C1))
        assert remove_by_connection(C9, tab) == tab


# --- remove_subscription ------------------------------------------------------


class TestRemoveSubscription:
    def test_removes_pair(self):
        tab = table(("1", C1), ("2", C1))
        assert remove_subscription(Channel("1"), C1, tab) == table(("2", C1))

    def test_empty_table(self):
        assert remove_subscription(Channel("1"), C1, EMPTY_TABLE) == ()

    def test_absent_pair_is_identity(self):
        tab = table(("1", C1))
        assert remove_subscription(Channel("3"), C1, tab) == tab

    def test_removes_all_duplicates(self):
        tab = table(("1", C1), ("2", C2), ("1", C1))
        assert remove_subscription(Channel("1"), C1, tab) == table(("2", C2))


# --- add_subscription ----------------------------------------------------------


class TestAddSubscription:
    def test_add_to_empty(self):
        assert add_subscription(Channel("1"), "fh01", EMPTY_TABLE) == table(("1", "fh01"))

    def test_prepends(self):
        tab = table(("1", C1))
        assert add_subscription(Channel("2"), C2, tab) == table(("2", C2), ("1", C1))

    def test_permits_duplicates(self):
        tab = table(("1", C1))
        assert add_subscription(Channel("1"), C1, tab) == table(("1", C1), ("1", C1))


# --- contains_subscription -------------------------------------------------------


class TestContainsSubscription:
    def test_empty_table_contains_nothing(self):
        assert contains_subscription(Channel("1"), C1, EMPTY_TABLE) is False

    def test_mismatched_channel(self):
        assert contains_subscription(Channel("2"), C1, table(("1", C1))) is False

    def test_found_after_add(self):
        tab = add_subscription(Channel("1"), "fh01", table(("2", C2)))
        assert contains_subscription(Channel("1"), "fh01", tab) is True


# --- subscribe / unsubscribe -------------------------------------------------------


class TestSubscribe:
    def test_absent_pair_reduces_to_add(self):
        assert subscribe(Channel("1"), C1, EMPTY_TABLE) == table(("1", C1))

    def test_idempotent(self):
        tab = table(("1", C1))
        assert subscribe(Channel("1"), C1, tab) == tab

    def test_prepends_to_existing(self):
        assert subscribe(Channel("2"), C1, table(("1", C1))) == table(("2", C1), ("1", C1))


class TestUnsubscribe:
    def test_removes_present_pair(self):
        tab = table(("1", C1), ("2", C2))
        assert unsubscribe(Channel("1"), C1, tab) == table(("2", C2))

    def test_empty_table(self):
        assert unsubscribe(Channel("1"), C1, EMPTY_TABLE) == ()

    def test_absent_pair_is_identity(self):
        tab = table(("1", C1))
        assert unsubscribe(Channel("3"), C1, tab) == tab


# --- publish_with -----------------------------------------------------------------


class TestPublishWith:
    def test_constant_deliver(self):
        assert publish_with(lambda _conn: 1, table(("1", "fh01"))) == [1]

    def test_identity_deliver_exposes_connection(self):
        assert publish_with(lambda conn: conn, table(("1", "fh01"))) == ["fh01"]

    def test_empty_traversal(self):
        assert publish_with(lambda _conn: 1, EMPTY_TABLE) == []

    def test_failure_short_circuits(self):
        tab = table(("1", "a"), ("1", "b"), ("1", "c"))
        seen = []

        def deliver(conn):
            seen.append(conn)
            if conn == "b":
                raise RuntimeError("down")
            return conn

        with pytest.raises(RuntimeError, match="down"):
            publish_with(deliver, tab)
        assert seen == ["a", "b"]

    def test_failure_on_nonempty_table(self):
        def deliver(_conn):
            raise OSError("boom")

        with pytest.raises(OSError):
            publish_with(deliver, table(("1", C1)))


# --- Properties --------------------------------------------------------------------

channels = st.sampled_from([Channel("a"), Channel("b"), Channel("c")])
conn_ids = st.sampled_from([ConnectionId(i) for i in range(4)])
entries = st.builds(SubscriptionEntry, channels, conn_ids)
tables = st.lists(entries, max_size=12).map(tuple)


@given(channels, tables)
def test_filter_matches_and_counts(channel, tab):
    result = handles_by_channel(channel, tab)
    assert all(e.channel == channel for e in result)
    assert len(result) == sum(1 for e in tab if e.channel == channel)


@given(channels, conn_ids, tables)
def test_membership_always_holds_after_add(channel, conn, tab):
    assert contains_subscription(channel, conn, add_subscription(channel, conn, tab))


@given(channels, conn_ids, tables)
def test_subscribe_is_idempotent(channel, conn, tab):
    once = subscribe(channel, conn, tab)
    assert subscribe(channel, conn, once) == once


@given(channels, conn_ids, tables)
def test_unsubscribe_cancels_fresh_subscribe(channel, conn, tab):
    if not contains_subscription(channel, conn, tab):
        assert unsubscribe(channel, conn, subscribe(channel, conn, tab)) == tab


@given(channels, conn_ids, tables)
def test_removed_connection_never_matches(channel, conn, tab):
    remaining = handles_by_channel(channel, remove_by_connection(conn, tab))
    assert all(e.connection != conn for e in remaining)


@given(tables)
def test_publish_with_pure_deliver_maps_in_order(tab):
    results = publish_with(lambda conn: ("sent", conn), tab)
    assert len(results) == len(tab)
    for i, e in enumerate(tab):
        assert results[i] == ("sent", e.connection)


@given(st.lists(st.tuples(st.booleans(), channels, conn_ids), max_size=20))
def test_subscribe_unsubscribe_folds_never_duplicate_pairs(steps):
    tab = EMPTY_TABLE
    for is_subscribe, channel, conn in steps:
        if is_subscribe:
            tab = subscribe(channel, conn, tab)
        else:
            tab = unsubscribe(channel, conn, tab)
    pairs = [(e.channel, e.connection) for e in tab]
    assert len(pairs) == len(set(pairs))


@given(channels, conn_ids, tables)
def test_operations_are_pure(channel, conn, tab):
    before = tuple(tab)
    assert subscribe(channel, conn, tab) == subscribe(channel, conn, tab)
    assert unsubscribe(channel, conn, tab) == unsubscribe(channel, conn, tab)
    assert handles_by_channel(channel, tab) == handles_by_channel(channel, tab)
    assert tab == before


def test_oracle_agreement_on_seeded_random_tables():
    rng = random.Random(2024)
    pool_channels = [Channel(str(i)) for i in range(1, 9)]
    pool_conns = [ConnectionId(i) for i in range(8)]
    for _ in range(1000):
        tab = tuple(
            SubscriptionEntry(rng.choice(pool_channels), rng.choice(pool_conns))
            for _ in range(rng.randint(0, 32))
        )
        ch = rng.choice(pool_channels)
        conn = rng.choice(pool_conns)
        assert handles_by_channel(ch, tab) == scan_matching(ch, tab)
        assert remove_by_connection(conn, tab) == scan_without_connection(conn, tab)
        assert remove_subscription(ch, conn, tab) == scan_without_pair(ch, conn, tab)
        assert contains_subscription(ch, conn, tab) == scan_member(ch, conn, tab)
        assert subscribe(ch, conn, tab) == scan_subscribe(ch, conn, tab)
        assert unsubscribe(ch, conn, tab) == scan_unsubscribe(ch, conn, tab)
