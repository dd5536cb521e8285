"""Shared vocabulary: node ids, payloads, round inboxes, sender registries.

Node ids are plain ints (unique, not necessarily consecutive).  Payloads are
small frozen dataclasses so that identical messages compare and hash equal,
which is what per-round duplicate suppression keys on.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterable, Iterator, Optional

NodeId = int

#: Destination marker for a broadcast in an outbox entry.
BROADCAST = None


class ProtocolError(RuntimeError):
    """A state machine was driven in a way its contract forbids."""


class _Bottom:
    """The distinguished "no opinion" value; sorts below every other value."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "BOTTOM"

    def __reduce__(self):
        return (_Bottom, ())

    def __lt__(self, other):
        return other is not self

    def __le__(self, other):
        return True

    def __gt__(self, other):
        return False

    def __ge__(self, other):
        return other is self

    def __hash__(self):
        return hash("idonly.BOTTOM")


BOTTOM = _Bottom()


# -- payloads ---------------------------------------------------------------

@dataclass(frozen=True)
class Present:
    pass


@dataclass(frozen=True)
class Init:
    """Round-one announcement; carries the body for a broadcast ``(m, s)``."""
    body: Any = None


@dataclass(frozen=True)
class Echo:
    origin: NodeId
    body: Any = None


@dataclass(frozen=True)
class Opinion:
    value: Any


@dataclass(frozen=True)
class Input:
    value: Any


@dataclass(frozen=True)
class Prefer:
    value: Any


@dataclass(frozen=True)
class StrongPrefer:
    value: Any


@dataclass(frozen=True)
class NoPreference:
    pass


@dataclass(frozen=True)
class NoStrongPreference:
    pass


@dataclass(frozen=True)
class Ack:
    round: int


@dataclass(frozen=True)
class Absent:
    pass


@dataclass(frozen=True)
class Event:
    body: Any
    round: int


@dataclass(frozen=True)
class Tagged:
    """A payload namespaced to one protocol instance."""
    tag: Any
    payload: Any


PAYLOAD_TYPES = {
    cls.__name__: cls
    for cls in (Present, Init, Echo, Opinion, Input, Prefer, StrongPrefer,
                NoPreference, NoStrongPreference, Ack, Absent, Event, Tagged)
}


def encode_value(value):
    if value is BOTTOM:
        return None
    if isinstance(value, Fraction):
        return {"fraction": str(value)}
    if isinstance(value, tuple):
        return [encode_value(v) for v in value]
    return value


def decode_value(obj):
    if obj is None:
        return BOTTOM
    if isinstance(obj, dict) and set(obj) == {"fraction"}:
        return Fraction(obj["fraction"])
    if isinstance(obj, list):
        return tuple(decode_value(v) for v in obj)
    return obj


def payload_to_obj(payload) -> dict:
    """JSON-ready dict with a stable key order (``type`` first)."""
    obj = {"type": type(payload).__name__}
    for field in dataclasses.fields(payload):
        value = getattr(payload, field.name)
        if field.name == "payload":
            obj[field.name] = payload_to_obj(value)
        else:
            obj[field.name] = encode_value(value)
    return obj


def payload_from_obj(obj: dict):
    cls = PAYLOAD_TYPES[obj["type"]]
    kwargs = {}
    for field in dataclasses.fields(cls):
        if field.name not in obj:
            continue
        raw = obj[field.name]
        if field.name == "payload":
            kwargs[field.name] = payload_from_obj(raw)
        else:
            kwargs[field.name] = decode_value(raw)
    return cls(**kwargs)


# -- thresholds -------------------------------------------------------------

def ge_one_third(count: int, n: int) -> bool:
    """``count >= n/3`` in exact integer arithmetic."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return 3 * count >= n


def ge_two_thirds(count: int, n: int) -> bool:
    """``count >= 2n/3`` in exact integer arithmetic."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return 3 * count >= 2 * n


# -- inbox ------------------------------------------------------------------

class RoundInbox:
    """Messages delivered to one node in one round.

    Keeps at most one copy of each ``(sender, payload)`` pair; a sender may
    still contribute several distinct payloads.
    """

    __slots__ = ("_by_sender", "_by_payload")

    def __init__(self, items: Iterable[tuple[NodeId, Any]] = ()):
        self._by_sender: dict[NodeId, dict[Any, None]] = {}
        self._by_payload: Optional[dict[Any, set]] = None
        for sender, payload in items:
            self.add(sender, payload)

    def add(self, sender: NodeId, payload) -> None:
        self._by_sender.setdefault(sender, {})[payload] = None
        self._by_payload = None

    def senders(self) -> set[NodeId]:
        return set(self._by_sender)

    def payloads(self, sender: NodeId) -> tuple:
        return tuple(self._by_sender.get(sender, ()))

    def has(self, sender: NodeId, payload) -> bool:
        return payload in self._by_sender.get(sender, ())

    def items(self) -> Iterator[tuple[NodeId, Any]]:
        for sender, payloads in self._by_sender.items():
            for payload in payloads:
                yield sender, payload

    def by_payload(self) -> dict[Any, set]:
        if self._by_payload is None:
            index: dict[Any, set] = {}
            for sender, payloads in self._by_sender.items():
                for payload in payloads:
                    index.setdefault(payload, set()).add(sender)
            self._by_payload = index
        return self._by_payload

    def count(self, payload) -> int:
        """Number of distinct senders that sent exactly ``payload``."""
        return len(self.by_payload().get(payload, ()))

    def split_tagged(self) -> tuple[dict, list]:
        """Per-tag inboxes of the unwrapped ``Tagged`` payloads, plus the untagged rest."""
        routed: dict = {}
        rest = []
        for sender, payloads in self._by_sender.items():
            for payload in payloads:
                if type(payload) is Tagged:
                    box = routed.get(payload.tag)
                    if box is None:
                        box = routed[payload.tag] = RoundInbox()
                    box._by_sender.setdefault(sender, {})[payload.payload] = None
                else:
                    rest.append((sender, payload))
        return routed, rest

    def copy(self) -> "RoundInbox":
        out = RoundInbox()
        out._by_sender = {s: dict(p) for s, p in self._by_sender.items()}
        return out

    def filtered(self, keep) -> "RoundInbox":
        out = RoundInbox()
        out._by_sender = {s: dict(p) for s, p in self._by_sender.items() if s in keep}
        return out

    def merged(self, other: "RoundInbox") -> "RoundInbox":
        out = RoundInbox(self.items())
        for sender, payload in other.items():
            out.add(sender, payload)
        return out

    def __len__(self):
        return sum(len(p) for p in self._by_sender.values())

    def __bool__(self):
        return bool(self._by_sender)

    def __repr__(self):
        return f"RoundInbox({list(self.items())!r})"


# -- registry ---------------------------------------------------------------

class SenderRegistry:
    """A node's view of who exists: the set behind ``n_v``.

    ``growing`` registries absorb every sender ever heard from; a frozen
    registry is fixed and is used to discard envelopes from outsiders.
    """

    __slots__ = ("members", "frozen")

    def __init__(self, members: Iterable[NodeId] = (), frozen: bool = False):
        self.members = set(members)
        self.frozen = frozen

    @property
    def n(self) -> int:
        return len(self.members)

    def absorb(self, inbox: RoundInbox) -> RoundInbox:
        """Fold this round's senders in; return the inbox the protocol should see."""
        if self.frozen:
            return inbox.filtered(self.members)
        self.members |= inbox.senders()
        return inbox

    def freeze(self) -> "SenderRegistry":
        return SenderRegistry(self.members, frozen=True)

    def copy(self) -> "SenderRegistry":
        return SenderRegistry(self.members, self.frozen)

    def __contains__(self, node):
        return node in self.members

    def __repr__(self):
        mode = "frozen" if self.frozen else "growing"
        return f"SenderRegistry({mode}, {sorted(self.members)})"


def absorb_round(registry: SenderRegistry, inbox: RoundInbox) -> tuple[SenderRegistry, RoundInbox]:
    """Functional form of :meth:`SenderRegistry.absorb`."""
    reg = registry.copy()
    view = reg.absorb(inbox)
    return reg, view
