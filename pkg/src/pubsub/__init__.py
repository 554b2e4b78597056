"""Topic-based publish/subscribe broker over a line-oriented TCP protocol.

The package splits into a pure subscription-table algebra (:mod:`.core`),
the text wire grammar (:mod:`.protocol`), the threaded TCP broker
(:mod:`.broker`), executable conformance checks (:mod:`.conformance`),
and the command-line front end (:mod:`.cli`).
"""

__version__ = "0.1.0"

from .core import (
    EMPTY_TABLE,
    Channel,
    ConnectionId,
    SubscriptionEntry,
    SubscriptionTable,
    add_subscription,
    contains_subscription,
    handles_by_channel,
    publish_with,
    remove_by_connection,
    remove_subscription,
    subscribe,
    unsubscribe,
)
from .protocol import (
    BANNER,
    PROMPT,
    Command,
    DeliveryLine,
    ParseError,
    ParseErrorKind,
    Publish,
    Quit,
    Subscribe,
    Unsubscribe,
    format_delivery,
    format_response,
    greeting,
    parse_command,
    render_command,
)
from .broker import Broker, BrokerState, CommandOutcome, Outbox, run_session

__all__ = [
    "__version__",
    # core
    "EMPTY_TABLE",
    "Channel",
    "ConnectionId",
    "SubscriptionEntry",
    "SubscriptionTable",
    "add_subscription",
    "contains_subscription",
    "handles_by_channel",
    "publish_with",
    "remove_by_connection",
    "remove_subscription",
    "subscribe",
    "unsubscribe",
    # protocol
    "BANNER",
    "PROMPT",
    "Command",
    "DeliveryLine",
    "ParseError",
    "ParseErrorKind",
    "Publish",
    "Quit",
    "Subscribe",
    "Unsubscribe",
    "format_delivery",
    "format_response",
    "greeting",
    "parse_command",
    "render_command",
    # broker
    "Broker",
    "BrokerState",
    "CommandOutcome",
    "Outbox",
    "run_session",
]
