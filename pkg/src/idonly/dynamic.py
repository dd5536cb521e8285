"""Total ordering of events while nodes join and leave.

One parallel-consensus instance starts every round, keyed by that round and
restricted to a snapshot of the membership view; instance pairs are keyed by
submitter.  A round ``k`` is final at round ``r`` once
``r - k > 5 |S^k| / 2 + 2``, and the chain is the ordered outputs of every
instance up to the largest ``R`` such that all rounds ``<= R`` are final.

By default a round is additionally held back until the node's own instance
has closed at least one phase earlier.  Every correct node closes an instance
within one phase of the first, so a final instance is closed everywhere.
The size-based window alone is available as ``finality="window"``.
"""
from __future__ import annotations

import copy
from collections import Counter
from dataclasses import dataclass
from typing import Any, Iterable, Optional

from .core import (BROADCAST, Absent, Ack, Event, NodeId, Present,
                   ProtocolError, RoundInbox, Tagged)
from .parallel import PcDone, PcNode


class JoinFailed(RuntimeError):
    """No strict majority among the round numbers in the received acks."""


@dataclass(frozen=True)
class ChainAppend:
    entries: tuple
    round: int


def is_final(current: int, instance_round: int, view_size: int) -> bool:
    """``current - instance_round > 5 * view_size / 2 + 2`` without fractions."""
    return 2 * (current - instance_round) > 5 * view_size + 4


def first_final_round(instance_round: int, view_size: int) -> int:
    return instance_round + (5 * view_size + 4) // 2 + 1


#: "settled" also waits one phase past the node's own close of the instance;
#: "window" applies the size-based window alone.
FINALITY_RULES = ("settled", "window")
PHASE_ROUNDS = 5


def join(self_id: NodeId, acks: Iterable[tuple[int, NodeId]]) -> tuple[int, set]:
    """Round number and initial view for a node that just announced itself.

    ``acks`` is the multiset of ``(round, sender)`` pairs received; the
    round is one past the strict-majority ack value.
    """
    acks = list(acks)
    tally = Counter(r for r, _ in acks)
    if tally:
        value, count = max(tally.items(), key=lambda kv: (kv[1], -kv[0]))
        if 2 * count > len(acks):
            return value + 1, {u for _, u in acks}
    raise JoinFailed(f"node {self_id}: no majority round among {sorted(tally.items())}")


class DynamicNode:
    def __init__(self, self_id: NodeId, members: Optional[Iterable[NodeId]] = None,
                 finality: str = "settled"):
        if finality not in FINALITY_RULES:
            raise ValueError(f"finality must be one of {FINALITY_RULES}")
        self.finality = finality
        self.self_id = self_id
        self.view: set[NodeId] = set()
        self.r: Optional[int] = None
        self.joined = members is not None
        if self.joined:
            self.view = set(members) | {self_id}
            self.r = 0
        self.wait = 0
        self.instances: dict[int, PcNode] = {}
        self.live: list[int] = []                     # instances still running, oldest first
        self.snapshots: dict[int, frozenset] = {}
        self.closed: dict[int, int] = {}
        self.results: dict[int, tuple] = {}
        self.final_upto: Optional[int] = None
        self.chain: list[tuple] = []
        self.premature: list[tuple[int, int]] = []     # (instance, round) final before closing
        self.final_at: dict[int, int] = {}
        self.leave_requested = False
        self.leaving = False
        self.left_at: Optional[int] = None
        self.halted = False
        self.queued_event: Any = None
        self.started = False

    # -- driver hooks -------------------------------------------------------

    def submit(self, event) -> None:
        """Witness ``event``; it is broadcast in the next executed round."""
        self.queued_event = event

    def request_leave(self) -> None:
        if self.leave_requested:
            raise ProtocolError(f"node {self.self_id} is already leaving")
        self.leave_requested = True

    def announce_leave(self) -> list:
        """Switch to draining mode and return the absent broadcast."""
        if self.leaving:
            raise ProtocolError(f"node {self.self_id} already left")
        self.leave_requested = True
        self.leaving = True
        self.left_at = self.r
        return [(Absent(), BROADCAST)]

    # -- rounds ---------------------------------------------------------------

    def start(self) -> list:
        if self.started:
            raise ProtocolError("start() called twice")
        self.started = True
        if self.joined:
            out, _ = self._loop(RoundInbox())
            return out
        return [(Present(), BROADCAST)]

    def step(self, inbox: RoundInbox) -> tuple[list, list]:
        if self.halted:
            raise ProtocolError(f"node {self.self_id} stepped after halting")
        if not self.joined:
            self.wait += 1
            if self.wait < 2:
                return [], []
            acks = [(p.round, u) for u, p in inbox.items() if isinstance(p, Ack)]
            r0_plus_one, members = join(self.self_id, acks)
            self.r = r0_plus_one - 1
            self.view = members | {self.self_id}
            self.joined = True
        return self._loop(inbox)

    def _loop(self, inbox: RoundInbox) -> tuple[list, list]:
        self.r += 1
        r = self.r
        out: list = []
        routed, rest = inbox.split_tagged()
        arrived, gone = [], []
        pairs: dict[NodeId, Any] = {}
        for u, payload in rest:
            kind = type(payload)
            if kind is Event:
                if payload.round == r - 1 and (u not in pairs or payload.body < pairs[u]):
                    pairs[u] = payload.body
            elif u == self.self_id:
                continue
            elif kind is Present:
                arrived.append(u)
            elif kind is Absent:
                gone.append(u)
        for u in sorted(arrived):
            self.view.add(u)
            out.append((Ack(r), u))
        if self.leave_requested and not self.leaving:
            out.extend(self.announce_leave())
        for u in gone:
            self.view.discard(u)
        if self.queued_event is not None and not self.leaving:
            out.append((Event(self.queued_event, r), BROADCAST))
        self.queued_event = None

        for k in list(self.live):
            pc = self.instances[k]
            pc_out, pc_events = pc.step(routed.get(k, RoundInbox()))
            out.extend((Tagged(k, p), to) for p, to in pc_out)
            for ev in pc_events:
                if isinstance(ev, PcDone):
                    self.closed[k] = r
                    self.results[k] = tuple(sorted(ev.outputs))
                    self.live.remove(k)

        if not self.leaving:
            pc = PcNode(self.self_id, sorted(pairs.items()), allowed=self.view)
            self.instances[r] = pc
            self.live.append(r)
            self.snapshots[r] = frozenset(self.view)
            out.extend((Tagged(r, p), to) for p, to in pc.start())

        events = self._refresh_chain(r)
        if self.leaving and not self.live:
            self.halted = True
        return out, events

    def _refresh_chain(self, r: int) -> list:
        upto = self.final_upto
        for k in sorted(self.instances):
            if upto is not None and k <= upto:
                continue
            if k >= r or not is_final(r, k, len(self.snapshots[k])):
                break
            if self.finality == "settled" and (
                    k not in self.closed or r < self.closed[k] + PHASE_ROUNDS):
                break
            upto = k
            self.final_at[k] = r
            if k not in self.closed:
                self.premature.append((k, r))
        if upto == self.final_upto:
            return []
        start = -1 if self.final_upto is None else self.final_upto
        self.final_upto = upto
        entries = []
        for k in sorted(self.instances):
            if start < k <= upto:
                entries.extend((k, u, m) for u, m in self.results.get(k, ()))
        if not entries:
            return []
        self.chain.extend(entries)
        return [ChainAppend(tuple(entries), r)]

    def late_results(self) -> list:
        """Instances that closed only after they had already been treated as final."""
        return [k for k, r in self.premature if self.results.get(k)]


def dto_step(state: DynamicNode, inbox: RoundInbox, own_event: Any = None):
    """Functional wrapper returning ``(state', outbox, chain_delta)``."""
    new = copy.deepcopy(state)
    if own_event is not None:
        new.submit(own_event)
    outbox, events = new.step(inbox)
    delta = [e for ev in events for e in ev.entries]
    return new, outbox, delta


def leave(state: DynamicNode):
    new = copy.deepcopy(state)
    outbox = new.announce_leave()
    if not new.live:
        new.halted = True
    return new, outbox
