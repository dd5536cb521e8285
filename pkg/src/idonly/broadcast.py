"""Reliable broadcast of one message ``(m, s)`` without knowing n or f.

Every body ``m`` claimed for the designated sender ``s`` is tracked as its own
instance; a node accepts ``(m, s)`` once two thirds of the senders it has ever
heard from echo it in a single round.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Any, Optional

from .core import (BROADCAST, Echo, Init, NodeId, Present, ProtocolError,
                   RoundInbox, SenderRegistry, ge_one_third, ge_two_thirds)


@dataclass(frozen=True)
class Accepted:
    body: Any
    sender: NodeId
    round: int


class RbNode:
    """Per-node reliable-broadcast state machine for designated sender ``sender_id``."""

    def __init__(self, self_id: NodeId, sender_id: NodeId, body: Any = None):
        if body is not None and self_id != sender_id:
            raise ProtocolError(f"node {self_id} is not the sender and cannot supply a body")
        if body is None and self_id == sender_id:
            raise ProtocolError("the sender must supply a body")
        self.self_id = self_id
        self.sender_id = sender_id
        self.body = body
        self.registry = SenderRegistry()
        self.round = 0
        self.accepted: dict[Any, int] = {}
        self.echoed: dict[Any, list[int]] = {}
        # echo senders per body in the most recent round; read by the verifier
        self.last_echoes: dict[Any, frozenset] = {}

    def start(self) -> list:
        if self.round != 0:
            raise ProtocolError("start() called twice")
        self.round = 1
        if self.self_id == self.sender_id:
            return [(Init(self.body), BROADCAST)]
        return [(Present(), BROADCAST)]

    def step(self, inbox: RoundInbox) -> tuple[list, list]:
        if self.round < 1:
            raise ProtocolError("step() before start()")
        self.round += 1
        rnd = self.round
        self.registry.absorb(inbox)
        outbox: list = []
        if rnd == 2:
            bodies = sorted(
                (p.body for p in inbox.payloads(self.sender_id) if isinstance(p, Init)),
                key=repr)
            for body in bodies:
                self._echo(body, outbox)
            self.last_echoes = {}
            return outbox, []

        echoes: dict[Any, set] = {}
        for payload, senders in inbox.by_payload().items():
            if isinstance(payload, Echo) and payload.origin == self.sender_id:
                echoes[payload.body] = senders
        self.last_echoes = {b: frozenset(s) for b, s in echoes.items()}
        n_v = self.registry.n
        events = []
        for body in sorted(echoes, key=repr):
            count = len(echoes[body])
            if body in self.accepted:
                continue
            if ge_one_third(count, n_v):
                self._echo(body, outbox)
            if ge_two_thirds(count, n_v):
                self.accepted[body] = rnd
                events.append(Accepted(body, self.sender_id, rnd))
        return outbox, events

    def _echo(self, body, outbox):
        outbox.append((Echo(self.sender_id, body), BROADCAST))
        self.echoed.setdefault(body, []).append(self.round)

    def clone(self) -> "RbNode":
        other = copy.copy(self)
        other.registry = self.registry.copy()
        other.accepted = dict(self.accepted)
        other.echoed = {b: list(r) for b, r in self.echoed.items()}
        return other

    def key(self) -> tuple:
        """Hashable summary of everything that influences future behaviour."""
        return (frozenset(self.registry.members), frozenset(self.accepted))


def rb_init(self_id: NodeId, sender_id: NodeId, body_if_sender: Optional[Any] = None):
    state = RbNode(self_id, sender_id, body_if_sender)
    return state, state.start()


def rb_step(state: RbNode, inbox: RoundInbox):
    new = state.clone()
    outbox, events = new.step(inbox)
    return new, outbox, events
