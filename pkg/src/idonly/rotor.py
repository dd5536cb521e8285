"""Rotor-coordinator: rotate through candidate coordinators, one per round.

Candidates are admitted the same way reliable broadcast accepts a message
(echo quorums over ``n_v``), coordinators are picked round-robin from the
sorted candidate list, and a node stops once the loop counter has gone
around the candidate list.  Stopping on the first repeated pick is kept as
the ``"reselect"`` rule; it differs only when a smaller id is admitted
mid-pass, which shifts every later position by one.
"""
from __future__ import annotations

import bisect
import copy
from dataclasses import dataclass
from typing import Any, Optional

from .core import (BROADCAST, Echo, Init, NodeId, Opinion, ProtocolError,
                   RoundInbox, SenderRegistry, ge_one_third, ge_two_thirds)


@dataclass(frozen=True)
class OpinionAccepted:
    coordinator: NodeId
    value: Any
    round: int


@dataclass(frozen=True)
class Terminated:
    round: int


def pick_opinion(inbox: RoundInbox, sender: NodeId, kind=Opinion):
    """The opinion ``sender`` delivered this round, if any.

    A faulty sender may deliver several distinct opinions; the smallest wins
    so the choice is deterministic.
    """
    values = [p.value for p in inbox.payloads(sender) if isinstance(p, kind)]
    if not values:
        return None
    return min(values)


#: "reselect" stops when the picked coordinator was already selected;
#: "wrap" stops once the loop counter has gone once around the candidates.
STOP_RULES = ("wrap", "reselect")


class RotorNode:
    def __init__(self, self_id: NodeId, registry: Optional[SenderRegistry] = None,
                 stop_rule: str = "wrap"):
        if stop_rule not in STOP_RULES:
            raise ValueError(f"unknown stop rule {stop_rule!r}")
        self.self_id = self_id
        self.stop_rule = stop_rule
        self.registry = registry if registry is not None else SenderRegistry()
        self.candidates: list[NodeId] = []      # C_v, ascending
        self.selected: set[NodeId] = set()      # S_v
        self.round = 0
        self.iteration = 0                      # loop counter r
        self.coordinator: Optional[NodeId] = None
        self.prev_coordinator: Optional[NodeId] = None
        self.terminated = False
        self.added_last: list[NodeId] = []

    @property
    def halted(self) -> bool:
        return self.terminated

    def start(self) -> list:
        if self.round != 0:
            raise ProtocolError("start() called twice")
        self.round = 1
        return [(Init(), BROADCAST)]

    def echo_inits(self, inbox: RoundInbox) -> list:
        """Round two: echo every node we heard ``init`` from."""
        self.round = 2
        self.registry.absorb(inbox)
        origins = sorted(s for s, p in inbox.items() if p == Init())
        return [(Echo(p), BROADCAST) for p in origins]

    def step(self, inbox: RoundInbox, opinion: Any = None,
             rnd: Optional[int] = None) -> tuple[list, list]:
        """One loop iteration.

        ``opinion`` is broadcast when this node is the freshly selected
        coordinator; pass ``None`` to leave opinion sending to the caller.
        ``rnd`` stamps events when the rotor is embedded in a larger schedule.
        """
        if self.round == 0:
            raise ProtocolError("step() before start()")
        if self.round == 1:
            return self.echo_inits(inbox), []
        if self.terminated:
            raise ProtocolError("rotor already terminated")
        self.round += 1
        stamp = self.round if rnd is None else rnd
        self.registry.absorb(inbox)
        n_v = self.registry.n
        out: list = []
        events: list = []
        self.added_last = []

        counts: dict[NodeId, int] = {}
        for payload, senders in inbox.by_payload().items():
            if isinstance(payload, Echo) and payload.body is None:
                counts[payload.origin] = len(senders)
        member = set(self.candidates)
        for p in sorted(counts):
            if p in member:
                continue
            if ge_one_third(counts[p], n_v):
                out.append((Echo(p), BROADCAST))
            if ge_two_thirds(counts[p], n_v):
                bisect.insort(self.candidates, p)
                self.added_last.append(p)
        if not self.candidates:
            raise ProtocolError(f"node {self.self_id}: no candidate coordinator at selection")

        p = self.candidates[self.iteration % len(self.candidates)]
        if self.coordinator is not None:
            value = pick_opinion(inbox, self.coordinator)
            if value is not None:
                events.append(OpinionAccepted(self.coordinator, value, stamp))
        self.prev_coordinator = self.coordinator
        self.coordinator = p
        if self._should_stop(p):
            self.terminated = True
            self.coordinator = None
            events.append(Terminated(stamp))
            return [], events
        self.selected.add(p)
        if p == self.self_id and opinion is not None:
            out.append((Opinion(opinion), BROADCAST))
        self.iteration += 1
        return out, events

    def _should_stop(self, p: NodeId) -> bool:
        if self.stop_rule == "reselect":
            return p in self.selected
        # one full pass over the candidates; the same as reselecting when
        # no smaller id was inserted mid-pass
        return self.iteration >= len(self.candidates)

    def clone(self) -> "RotorNode":
        other = copy.copy(self)
        other.registry = self.registry.copy()
        other.candidates = list(self.candidates)
        other.selected = set(self.selected)
        other.added_last = list(self.added_last)
        return other


def rotor_init(self_id: NodeId):
    state = RotorNode(self_id)
    return state, state.start()


def rotor_step(state: RotorNode, inbox: RoundInbox, own_opinion: Any):
    new = state.clone()
    outbox, events = new.step(inbox, own_opinion)
    return new, outbox, events
