"""Many identifier-tagged consensus instances sharing one rotor and registry.

Nodes need not agree up front on which instances exist.  An instance first
heard of during the first phase (input at round 2, prefer at round 3,
strongprefer processed at round 5) is adopted with bottom filled in for every
registered node that sent nothing of that type; anything first heard later is
dropped.  Aware nodes always answer, with explicit no-preference markers when
they lack a quorum, so silence only ever comes from faulty or finished nodes.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional

from .consensus import (INPUT, PREFER, STRONG, ROTOR_TYPES, PhaseCore,
                        phase_of)
from .core import (BOTTOM, BROADCAST, Input, NodeId, Opinion, Prefer,
                   ProtocolError, RoundInbox, SenderRegistry, StrongPrefer, Tagged)
from .rotor import RotorNode, pick_opinion

#: first-phase subround at which a message type may introduce a new instance
ADOPT_AT = {2: Input, 3: Prefer, 4: StrongPrefer}

BOTTOM_FILL = {INPUT: Input(BOTTOM), PREFER: Prefer(BOTTOM), STRONG: StrongPrefer(BOTTOM)}


@dataclass(frozen=True)
class PairOutput:
    instance: Any
    value: Any
    round: int


@dataclass(frozen=True)
class InstanceClosed:
    instance: Any
    value: Any
    round: int


@dataclass(frozen=True)
class PcDone:
    outputs: tuple
    round: int


@dataclass
class PcInstance:
    id: Any
    core: PhaseCore
    aware_at: int                     # absolute round the node learned of it
    has_input: bool
    closed_round: Optional[int] = None
    inboxes: dict = field(default_factory=dict)
    sent: dict = field(default_factory=dict)


def fill_for(core: PhaseCore, kind: str, phase: int):
    """Stand-in for silent registered senders: bottom in phase one, else our own last message."""
    if phase == 1:
        return BOTTOM_FILL[kind]
    return core.own_fill(kind)


def run_subround(core: PhaseCore, sub_inbox: RoundInbox, phase: int, sub: int, rnd: int,
                 has_input: bool, coordinator: Optional[NodeId]):
    """Advance one instance by one subround; returns the payload to broadcast, if any."""
    if sub == 1:
        if phase == 1 and not has_input:
            return None
        return core.send_input()
    if sub == 2:
        return core.on_inputs(sub_inbox, fill_for(core, INPUT, phase), rnd)
    if sub == 3:
        return core.on_prefers(sub_inbox, fill_for(core, PREFER, phase), rnd)
    if sub == 4:
        core.on_strongprefers(sub_inbox, fill_for(core, STRONG, phase), rnd)
        return None
    c = pick_opinion(sub_inbox, coordinator) if coordinator is not None else None
    core.decide(c)
    return None


class PcNode:
    def __init__(self, self_id: NodeId, inputs: Iterable[tuple[Any, Any]] = (),
                 allowed: Optional[Iterable[NodeId]] = None, record: bool = False):
        pairs = list(inputs)
        seen = set()
        for iid, value in pairs:
            if iid in seen:
                raise ValueError(f"duplicate instance id {iid!r}")
            if value is BOTTOM or value is None:
                raise ValueError(f"instance {iid!r}: bottom is not an admissible input")
            seen.add(iid)
        self.self_id = self_id
        self.inputs = dict(pairs)
        self.allowed = frozenset(allowed) if allowed is not None else None
        self.record = record
        self.rotor = RotorNode(self_id)
        self.registry: Optional[SenderRegistry] = None
        self.instances: dict[Any, PcInstance] = {}
        self.pending_adopt: dict[Any, RoundInbox] = {}
        self.discarded: list[tuple[int, Any]] = []
        self.round = 0
        self.rotor_buffer = RoundInbox()
        self.coordinator: Optional[NodeId] = None
        self.coordinators: dict[int, Optional[NodeId]] = {}
        self.done = False
        self.outputs: dict[Any, Any] = {}

    @property
    def halted(self) -> bool:
        return self.done

    # -- driving ------------------------------------------------------------

    def start(self) -> list:
        if self.round != 0:
            raise ProtocolError("start() called twice")
        self.round = 1
        return self.rotor.start()

    def step(self, inbox: RoundInbox) -> tuple[list, list]:
        if self.done:
            raise ProtocolError(f"node {self.self_id} stepped after completion")
        if self.round == 0:
            raise ProtocolError("step() before start()")
        self.round += 1
        rnd = self.round
        if self.allowed is not None:
            inbox = inbox.filtered(self.allowed)
        if rnd == 2:
            out = self.rotor.echo_inits(inbox)
            self.registry = SenderRegistry(inbox.senders(), frozen=True)
            self.rotor.registry = self.registry.copy()
            members = frozenset(self.registry.members)
            for iid, value in self.inputs.items():
                self.instances[iid] = PcInstance(iid, PhaseCore(value, members), 1, True)
            return out, []

        inbox = self.registry.absorb(inbox)
        routed, rest = inbox.split_tagged()
        for sender, payload in rest:
            if isinstance(payload, ROTOR_TYPES):
                self.rotor_buffer.add(sender, payload)
        phase, sub = phase_of(rnd)
        self._adopt(routed, phase, sub, rnd)

        out: list = []
        events: list = []
        for iid in sorted(self.instances, key=repr):
            inst = self.instances[iid]
            if inst.core.terminated:
                continue
            sub_inbox = routed.get(iid, RoundInbox())
            if self.record:
                inst.inboxes[rnd] = sub_inbox
            payload = self._advance(inst, sub_inbox, phase, sub, rnd, events)
            if payload is not None:
                if self.record:
                    inst.sent[rnd] = payload
                out.append((Tagged(iid, payload), BROADCAST))

        if sub == 4:
            if not self.rotor.terminated:
                buffered, self.rotor_buffer = self.rotor_buffer, RoundInbox()
                rotor_out, _ = self.rotor.step(buffered, opinion=None, rnd=rnd)
                out.extend(rotor_out)
            self.coordinator = self.rotor.coordinator
            self.coordinators[phase] = self.coordinator
            if self.coordinator == self.self_id:
                for iid in sorted(self.instances, key=repr):
                    inst = self.instances[iid]
                    if not inst.core.terminated:
                        out.append((Tagged(iid, Opinion(inst.core.x)), BROADCAST))

        if sub == 5 and all(i.core.terminated for i in self.instances.values()):
            self.done = True
            events.append(PcDone(tuple(sorted(self.outputs.items(), key=repr)), rnd))
            return [], events
        return out, events

    # -- internals ------------------------------------------------------------

    def _adopt(self, routed, phase, sub, rnd):
        if sub == 5 and phase == 1:
            for iid, held in sorted(self.pending_adopt.items(), key=repr):
                inst = self._new_instance(iid, rnd)
                inst.core.on_strongprefers(held, BOTTOM_FILL[STRONG], rnd - 1)
                if self.record:
                    inst.inboxes[rnd - 1] = held
            self.pending_adopt = {}
        for iid in sorted(routed, key=repr):
            if iid in self.instances:
                continue
            kind = ADOPT_AT.get(sub) if phase == 1 else None
            if kind is not None and any(isinstance(p, kind) for _, p in routed[iid].items()):
                if sub == 4:
                    self.pending_adopt[iid] = routed[iid]
                else:
                    self._new_instance(iid, rnd)
            else:
                self.discarded.append((rnd, iid))

    def _new_instance(self, iid, rnd) -> PcInstance:
        inst = PcInstance(iid, PhaseCore(BOTTOM, frozenset(self.registry.members)), rnd, False)
        self.instances[iid] = inst
        return inst

    def _advance(self, inst: PcInstance, sub_inbox: RoundInbox, phase, sub, rnd, events):
        core = inst.core
        payload = run_subround(core, sub_inbox, phase, sub, rnd, inst.has_input, self.coordinator)
        if sub == 5 and core.terminated:
            inst.closed_round = rnd
            events.append(InstanceClosed(inst.id, core.output, rnd))
            if core.output is not BOTTOM:
                self.outputs[inst.id] = core.output
                events.append(PairOutput(inst.id, core.output, rnd))
        return payload

    def clone(self) -> "PcNode":
        return copy.deepcopy(self)


def pc_start(self_id: NodeId, inputs: Iterable[tuple[Any, Any]], allowed=None):
    state = PcNode(self_id, inputs, allowed)
    return state, state.start()


def pc_step(state: PcNode, inbox: RoundInbox):
    new = state.clone()
    outbox, events = new.step(inbox)
    return new, outbox, events


def pc_adopt(state: PcNode, envelope: tuple[NodeId, Tagged], phase_round: int) -> PcNode:
    """Adopt the instance named by ``envelope`` at first-phase subround ``phase_round``.

    ``envelope`` is ``(sender, Tagged(instance_id, payload))``.  A message of
    the wrong type for the subround, or one arriving after the first phase,
    is discarded and no instance is created.
    """
    sender, message = envelope
    new = state.clone()
    phase = phase_of(new.round)[0] if new.round >= 3 else 0
    kind = ADOPT_AT.get(4 if phase_round == 5 else phase_round)
    eligible = (phase == 1 and kind is not None and isinstance(message.payload, kind)
                and message.tag not in new.instances)
    if not eligible:
        new.discarded.append((new.round, message.tag))
        return new
    inst = new._new_instance(message.tag, new.round)
    if phase_round == 5:
        held = RoundInbox([(sender, message.payload)])
        inst.core.on_strongprefers(held, BOTTOM_FILL[STRONG], new.round)
    return new
