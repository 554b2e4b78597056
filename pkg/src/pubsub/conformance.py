"""Executable conformance checks for the subscription-table algebra.

Five named checks (example_1 .. example_5) pin exact behaviors of the
core operations on fixed fixtures; on top of those, every filter and
membership operation is compared against an independently written
linear-scan oracle on seeded random tables, and the wire grammar is
round-tripped. Universal claims are checked by exhaustive enumeration
over a small alphabet plus seeded random sampling; testing stands in
for proof here, and the report header says so.

The checks construct their own fixtures and never touch the broker or
the network, so they run anywhere, deterministically for a given seed.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass

from . import core, protocol
from .core import Channel, SubscriptionEntry, SubscriptionTable

RANDOM_CASES = 1000

EXHAUSTIVE_MAX_LEN = 4
EXHAUSTIVE_CHANNELS = (Channel("1"), Channel("2"), Channel("3"))
EXHAUSTIVE_CONNECTIONS = ("fh01", "fh02", "fh03")
# Tables of length 0..4 over a 3x3 entry alphabet: sum(9**k) = 7381.
EXHAUSTIVE_TABLE_COUNT = sum(
    (len(EXHAUSTIVE_CHANNELS) * len(EXHAUSTIVE_CONNECTIONS)) ** k
    for k in range(EXHAUSTIVE_MAX_LEN + 1)
)

DEFAULT_CHANNEL_ALPHABET = tuple(Channel(str(i)) for i in range(1, 9))
DEFAULT_CONNECTION_POOL = tuple(f"fh{i:02d}" for i in range(1, 9))


@dataclass(frozen=True)
class LemmaResult:
    """Outcome of one named check; `detail` is empty iff it passed."""

    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class TableGenerator:
    """Reproducible random subscription tables and operation arguments."""

    max_len: int = 32
    channel_alphabet: tuple[Channel, ...] = DEFAULT_CHANNEL_ALPHABET
    connection_pool: tuple = DEFAULT_CONNECTION_POOL
    seed: int = 0

    def tables(self, count: int):
        """Yield `count` random tables; identical on every call."""
        rng = random.Random(self.seed)
        for _ in range(count):
            yield self._table(rng)

    def cases(self, count: int):
        """Yield `count` random (table, channel, connection) triples."""
        rng = random.Random(self.seed)
        for _ in range(count):
            table = self._table(rng)
            yield table, rng.choice(self.channel_alphabet), rng.choice(self.connection_pool)

    def _table(self, rng: random.Random) -> SubscriptionTable:
        length = rng.randint(0, self.max_len)
        return tuple(
            SubscriptionEntry(rng.choice(self.channel_alphabet), rng.choice(self.connection_pool))
            for _ in range(length)
        )


# --- Independent linear-scan oracles -------------------------------------
#
# Deliberately naive reimplementations used only for comparison; they
# never call the operations they check.


def oracle_handles_by_channel(channel, table):
    out = []
    for entry in table:
        if entry.channel == channel:
            out.append(entry)
    return tuple(out)


def oracle_remove_by_connection(connection, table):
    out = []
    for entry in table:
        if entry.connection != connection:
            out.append(entry)
    return tuple(out)


def oracle_remove_subscription(channel, connection, table):
    out = []
    for entry in table:
        if entry.channel == channel and entry.connection == connection:
            continue
        out.append(entry)
    return tuple(out)


def oracle_contains_subscription(channel, connection, table):
    for entry in table:
        if entry.channel == channel and entry.connection == connection:
            return True
    return False


def oracle_subscribe(channel, connection, table):
    if oracle_contains_subscription(channel, connection, table):
        return tuple(table)
    return (SubscriptionEntry(channel, connection),) + tuple(table)


def oracle_unsubscribe(channel, connection, table):
    if not oracle_contains_subscription(channel, connection, table):
        return tuple(table)
    return oracle_remove_subscription(channel, connection, table)


# --- Named checks ---------------------------------------------------------


def _subs() -> SubscriptionTable:
    """The fixed one-entry fixture used by example_1 .. example_4."""
    return core.add_subscription(Channel("1"), "fh01", core.EMPTY_TABLE)


def check_lemma_1() -> LemmaResult:
    """Filtering the fixture by channel "1" selects exactly one entry."""
    got = len(core.handles_by_channel(Channel("1"), _subs()))
    if got == 1:
        return LemmaResult("example_1", True)
    return LemmaResult("example_1", False, f"expected length 1, got {got}")


def check_lemma_2() -> LemmaResult:
    """Filtering the fixture by channel "2" selects nothing."""
    got = len(core.handles_by_channel(Channel("2"), _subs()))
    if got == 0:
        return LemmaResult("example_2", True)
    return LemmaResult("example_2", False, f"expected length 0, got {got}")


def check_lemma_3() -> LemmaResult:
    """A constant deliver function yields one result per entry: [1]."""
    got = core.publish_with(lambda _conn: 1, _subs())
    if got == [1]:
        return LemmaResult("example_3", True)
    return LemmaResult("example_3", False, f"expected [1], got {got!r}")


def check_lemma_4() -> LemmaResult:
    """An identity deliver function exposes the connection: ["fh01"].

    Together with example_3 this shows the deliver argument drives the
    output, not just the traversal shape.
    """
    got = core.publish_with(lambda conn: conn, _subs())
    if got == ["fh01"]:
        return LemmaResult("example_4", True)
    return LemmaResult("example_4", False, f"expected ['fh01'], got {got!r}")


def enumerate_small_tables(
    channels=EXHAUSTIVE_CHANNELS,
    connections=EXHAUSTIVE_CONNECTIONS,
    max_len: int = EXHAUSTIVE_MAX_LEN,
):
    """Every table of length <= max_len over the channel x connection grid.

    Enumeration is a bijection with tuples over the entry alphabet, so
    each table appears exactly once.
    """
    alphabet = [
        SubscriptionEntry(channel, connection)
        for channel in channels
        for connection in connections
    ]
    for length in range(max_len + 1):
        for combo in itertools.product(alphabet, repeat=length):
            yield combo


def check_lemma_5(gen: TableGenerator) -> LemmaResult:
    """Membership after adding ("1", "fh01") holds for every table.

    The universally quantified claim is approximated two ways: (a)
    exhaustively over all tables of length <= 4 from a 3x3 alphabet
    (7381 tables, count asserted) and (b) over RANDOM_CASES draws from
    `gen`.
    """
    channel, connection = Channel("1"), "fh01"
    seen = 0
    for table in enumerate_small_tables():
        seen += 1
        if not core.contains_subscription(
            channel, connection, core.add_subscription(channel, connection, table)
        ):
            return LemmaResult(
                "example_5", False, f"membership failed on exhaustive table {table!r}"
            )
    if seen != EXHAUSTIVE_TABLE_COUNT:
        return LemmaResult(
            "example_5",
            False,
            f"exhaustive sweep covered {seen} tables, expected {EXHAUSTIVE_TABLE_COUNT}",
        )
    for table in gen.tables(RANDOM_CASES):
        if not core.contains_subscription(
            channel, connection, core.add_subscription(channel, connection, table)
        ):
            return LemmaResult(
                "example_5", False, f"membership failed on random table {table!r}"
            )
    return LemmaResult("example_5", True)


_ORACLE_PAIRS = (
    ("handles_by_channel", "ch"),
    ("remove_by_connection", "conn"),
    ("remove_subscription", "pair"),
    ("contains_subscription", "pair"),
    ("subscribe", "pair"),
    ("unsubscribe", "pair"),
)


def _apply(name: str, shape: str, table, channel, connection):
    op = getattr(core, name)
    oracle = globals()[f"oracle_{name}"]
    if shape == "ch":
        return op(channel, table), oracle(channel, table)
    if shape == "conn":
        return op(connection, table), oracle(connection, table)
    return op(channel, connection, table), oracle(channel, connection, table)


def check_oracle_equivalence(seed: int) -> list[LemmaResult]:
    """Compare each table operation against its oracle on random cases."""
    results = []
    for index, (name, shape) in enumerate(_ORACLE_PAIRS):
        gen = TableGenerator(seed=seed + index)
        mismatches = 0
        first = ""
        for table, channel, connection in gen.cases(RANDOM_CASES):
            got, expected = _apply(name, shape, table, channel, connection)
            if got != expected:
                mismatches += 1
                if not first:
                    first = (
                        f"first mismatch on channel={channel} connection={connection!r} "
                        f"table={table!r}: got {got!r}, oracle says {expected!r}"
                    )
        if mismatches == 0:
            results.append(LemmaResult(f"oracle_{name}", True))
        else:
            results.append(
                LemmaResult(
                    f"oracle_{name}",
                    False,
                    f"{mismatches}/{RANDOM_CASES} mismatches; {first}",
                )
            )
    return results


_CHANNEL_CHARS = "abcdefghijklmnopqrstuvwxyz0123456789-_.!#$%"
_MESSAGE_CHARS = _CHANNEL_CHARS + " \t[]<>'" + '"'


def _random_command(rng: random.Random) -> protocol.Command:
    kind = rng.randrange(4)
    if kind == 3:
        return protocol.Quit()
    token = "".join(rng.choice(_CHANNEL_CHARS) for _ in range(rng.randint(1, 12)))
    channel = Channel(token)
    if kind == 0:
        return protocol.Subscribe(channel)
    if kind == 1:
        return protocol.Unsubscribe(channel)
    message = "".join(rng.choice(_MESSAGE_CHARS) for _ in range(rng.randint(0, 40)))
    return protocol.Publish(channel, message)


def check_wire_roundtrip(seed: int) -> LemmaResult:
    """parse_command inverts render_command on random commands."""
    rng = random.Random(seed)
    for _ in range(RANDOM_CASES):
        cmd = _random_command(rng)
        rendered = protocol.render_command(cmd)
        parsed = protocol.parse_command(rendered)
        if parsed != cmd:
            return LemmaResult(
                "wire_roundtrip",
                False,
                f"{rendered!r} parsed back as {parsed!r}, expected {cmd!r}",
            )
    return LemmaResult("wire_roundtrip", True)


def run_all(seed: int = 42) -> list[LemmaResult]:
    """Run every check; deterministic for a given seed."""
    master = random.Random(seed)
    lemma5_seed = master.randrange(2**32)
    oracle_seed = master.randrange(2**32)
    roundtrip_seed = master.randrange(2**32)
    results = [
        check_lemma_1(),
        check_lemma_2(),
        check_lemma_3(),
        check_lemma_4(),
        check_lemma_5(TableGenerator(seed=lemma5_seed)),
    ]
    results.extend(check_oracle_equivalence(oracle_seed))
    results.append(check_wire_roundtrip(roundtrip_seed))
    return results


def format_report(results: list[LemmaResult], seed: int) -> str:
    """Human-readable report, one line per check, byte-stable per seed."""
    passed = sum(1 for r in results if r.passed)
    lines = [
        f"pubsub conformance (seed={seed})",
        "universal claims are checked by exhaustive small-alphabet enumeration",
        "plus seeded random sampling; this substitutes testing for proof.",
        "",
    ]
    for result in results:
        if result.passed:
            lines.append(f"{result.name}: PASS")
        else:
            lines.append(f"{result.name}: FAIL {result.detail}")
    lines.append("")
    lines.append(f"{passed}/{len(results)} checks passed")
    return "\n".join(lines)
