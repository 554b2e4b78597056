"""Wire grammar: parse inbound command lines, format outbound lines.

Everything here is a pure function over text. Line terminators are the
session layer's business: `parse_command` expects the trailing CR/LF to
be stripped already, and the formatters return unterminated text.

The full grammar is documented in docs/protocol.md.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .core import Channel

BANNER = "Write 'publish <ch> <msg>' to publish, 'subscribe <ch>' to subscribe."
PROMPT = "> "

_SEPARATORS = " \t"


@dataclass(frozen=True)
class Subscribe:
    channel: Channel


@dataclass(frozen=True)
class Unsubscribe:
    channel: Channel


@dataclass(frozen=True)
class Publish:
    channel: Channel
    message: str


@dataclass(frozen=True)
class Quit:
    pass


Command = Subscribe | Unsubscribe | Publish | Quit


class ParseErrorKind(Enum):
    """Which structural rule an inbound line failed."""

    EMPTY_LINE = "empty line"
    UNKNOWN_COMMAND = "unknown command"
    MISSING_CHANNEL = "missing channel"
    MISSING_MESSAGE = "missing message"


@dataclass(frozen=True)
class ParseError:
    """A rejected inbound line; `line` is the offending input verbatim."""

    kind: ParseErrorKind
    line: str


@dataclass(frozen=True)
class DeliveryLine:
    """An outbound message headed to a subscriber."""

    channel: Channel
    message: str


def _token(line: str, pos: int) -> tuple[str, int]:
    """Next run of non-separator characters at or after `pos`.

    Returns ("", len(line)) when only separators remain.
    """
    while pos < len(line) and line[pos] in _SEPARATORS:
        pos += 1
    start = pos
    while pos < len(line) and line[pos] not in _SEPARATORS:
        pos += 1
    return line[start:pos], pos


def parse_command(line: str) -> Command | ParseError:
    """Parse one inbound line into a command.

    Tokens are runs of non-space/tab characters; the first token picks
    the command by exact lowercase match. A publish message is the
    remainder of the line after the single separator following the
    channel token, kept verbatim. Never raises: malformed input comes
    back as a ParseError.
    """
    if "\r" in line or "\n" in line:
        # Reserved characters inside a line; callers strip terminators,
        # so this only fires on protocol-violating input.
        return ParseError(ParseErrorKind.UNKNOWN_COMMAND, line)
    keyword, pos = _token(line, 0)
    if not keyword:
        return ParseError(ParseErrorKind.EMPTY_LINE, line)
    if keyword == "quit":
        trailing, _ = _token(line, pos)
        if trailing:
            return ParseError(ParseErrorKind.UNKNOWN_COMMAND, line)
        return Quit()
    if keyword in ("subscribe", "unsubscribe"):
        token, pos = _token(line, pos)
        if not token:
            return ParseError(ParseErrorKind.MISSING_CHANNEL, line)
        trailing, _ = _token(line, pos)
        if trailing:
            return ParseError(ParseErrorKind.UNKNOWN_COMMAND, line)
        channel = Channel(token)
        return Subscribe(channel) if keyword == "subscribe" else Unsubscribe(channel)
    if keyword == "publish":
        token, pos = _token(line, pos)
        if not token:
            return ParseError(ParseErrorKind.MISSING_CHANNEL, line)
        if pos >= len(line):
            return ParseError(ParseErrorKind.MISSING_MESSAGE, line)
        return Publish(Channel(token), line[pos + 1 :])
    return ParseError(ParseErrorKind.UNKNOWN_COMMAND, line)


def render_command(cmd: Command) -> str:
    """Canonical text form of a command; parse_command inverts it."""
    if isinstance(cmd, Subscribe):
        return f"subscribe {cmd.channel}"
    if isinstance(cmd, Unsubscribe):
        return f"unsubscribe {cmd.channel}"
    if isinstance(cmd, Publish):
        return f"publish {cmd.channel} {cmd.message}"
    if isinstance(cmd, Quit):
        return "quit"
    raise TypeError(f"not a command: {cmd!r}")


def format_delivery(delivery: DeliveryLine) -> str:
    """Render a delivery as "[<channel>] <message>" (no terminator)."""
    return f"[{delivery.channel}] {delivery.message}"


def greeting() -> list[str]:
    """Banner lines sent once per session, before the first prompt."""
    return [BANNER]


def format_response(ok: bool, detail: str) -> str:
    """Render a command response: "OK <detail>" or "ERR <detail>"."""
    return f"OK {detail}" if ok else f"ERR {detail}"
