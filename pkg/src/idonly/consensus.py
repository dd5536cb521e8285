"""Early-terminating consensus on top of the rotor-coordinator.

A phase is five rounds: input, prefer, strongprefer, rotor, decide.  The
opinion bookkeeping for one agreement instance lives in :class:`PhaseCore`
so parallel consensus can run many of them against one shared rotor.
"""
from __future__ import annotations

import copy
from collections import Counter
from dataclasses import dataclass
from typing import Any, Callable, Optional

from .core import (BROADCAST, Echo, Init, Input, NodeId, NoPreference,
                   NoStrongPreference, Opinion, Prefer, ProtocolError,
                   RoundInbox, SenderRegistry, StrongPrefer, ge_one_third,
                   ge_two_thirds)
from .rotor import RotorNode, pick_opinion

INPUT, PREFER, STRONG = "input", "prefer", "strongprefer"

KIND_OF = {
    Input: INPUT,
    Prefer: PREFER,
    NoPreference: PREFER,
    StrongPrefer: STRONG,
    NoStrongPreference: STRONG,
}
VALUE_TYPE = {INPUT: Input, PREFER: Prefer, STRONG: StrongPrefer}

ROTOR_TYPES = (Init, Echo, Opinion)


@dataclass(frozen=True)
class Decided:
    value: Any
    round: int
    phase: int


def phase_of(rnd: int) -> tuple[int, int]:
    """Map an absolute round (>= 3) to ``(phase, subround)``, both 1-based."""
    if rnd < 3:
        raise ValueError(f"round {rnd} belongs to initialization")
    phase, sub = divmod(rnd - 3, 5)
    return phase + 1, sub + 1


def phase_start(phase: int) -> int:
    return 3 + 5 * (phase - 1)


def substitute_missing(inbox: RoundInbox, registry, kind: str, fill) -> RoundInbox:
    """Stand in ``fill`` for every registered sender that sent no ``kind`` message."""
    if fill is None:
        return inbox
    out = RoundInbox(inbox.items())
    for sender in registry:
        if not any(KIND_OF.get(type(p)) == kind for p in inbox.payloads(sender)):
            out.add(sender, fill)
    return out


def tally(inbox: RoundInbox, kind: str) -> Counter:
    """Per value, the number of distinct senders that sent a ``kind`` message for it."""
    counts: Counter = Counter()
    value_type = VALUE_TYPE[kind]
    for payload, senders in inbox.by_payload().items():
        if type(payload) is value_type:
            counts[payload.value] += len(senders)
    return counts


def strongest(counts: Counter, n: int, test: Callable[[int, int], bool]):
    """The value passing ``test``; ties go to the higher count, then the smaller value."""
    passing = [(-c, v) for v, c in counts.items() if test(c, n)]
    if not passing:
        return None
    passing.sort()
    return passing[0][1]


class PhaseCore:
    """Opinion state of one agreement instance across phases."""

    def __init__(self, value: Any, registry: frozenset):
        self.x = value
        self.registry = registry
        self.n = len(registry)
        self.last_sent: dict[str, Any] = {}
        self.strong_counts: Optional[Counter] = None
        self.terminated = False
        self.output: Any = None
        self.quorums: list[tuple[int, str, frozenset]] = []

    def _sent(self, payload):
        self.last_sent[KIND_OF[type(payload)]] = payload
        return payload

    def send_input(self):
        return self._sent(Input(self.x))

    def on_inputs(self, inbox: RoundInbox, fill, rnd: int):
        counts = tally(substitute_missing(inbox, self.registry, INPUT, fill), INPUT)
        self._note_quorums(rnd, INPUT, counts)
        x = strongest(counts, self.n, ge_two_thirds)
        if x is None:
            return self._sent(NoPreference())
        return self._sent(Prefer(x))

    def on_prefers(self, inbox: RoundInbox, fill, rnd: int):
        counts = tally(substitute_missing(inbox, self.registry, PREFER, fill), PREFER)
        self._note_quorums(rnd, PREFER, counts)
        x = strongest(counts, self.n, ge_one_third)
        if x is not None:
            self.x = x
        x = strongest(counts, self.n, ge_two_thirds)
        if x is None:
            return self._sent(NoStrongPreference())
        return self._sent(StrongPrefer(x))

    def on_strongprefers(self, inbox: RoundInbox, fill, rnd: int):
        counts = tally(substitute_missing(inbox, self.registry, STRONG, fill), STRONG)
        self._note_quorums(rnd, STRONG, counts)
        self.strong_counts = counts

    def decide(self, coordinator_value) -> bool:
        """Apply the decide round; return True when the instance terminates."""
        counts = self.strong_counts or Counter()
        self.strong_counts = None
        if strongest(counts, self.n, ge_one_third) is None and coordinator_value is not None:
            self.x = coordinator_value
        x = strongest(counts, self.n, ge_two_thirds)
        if x is not None:
            self.terminated = True
            self.output = x
            self.x = x
        return self.terminated

    def _note_quorums(self, rnd, kind, counts):
        values = frozenset(v for v, c in counts.items() if ge_two_thirds(c, self.n))
        if values:
            self.quorums.append((rnd, kind, values))

    def own_fill(self, kind):
        return self.last_sent.get(kind)


class ConsensusNode:
    def __init__(self, self_id: NodeId, value: Any):
        self.self_id = self_id
        self.input = value
        self.rotor = RotorNode(self_id)
        self.registry: Optional[SenderRegistry] = None
        self.core: Optional[PhaseCore] = None
        self.round = 0
        self.rotor_buffer = RoundInbox()
        self.coordinators: dict[int, Optional[NodeId]] = {}
        self.phase_end: dict[int, Any] = {}
        self.terminated = False
        self.output: Any = None

    @property
    def x(self):
        return self.core.x if self.core is not None else self.input

    @property
    def halted(self) -> bool:
        return self.terminated

    def start(self) -> list:
        if self.round != 0:
            raise ProtocolError("start() called twice")
        self.round = 1
        return self.rotor.start()

    def step(self, inbox: RoundInbox) -> tuple[list, list]:
        if self.terminated:
            raise ProtocolError(f"node {self.self_id} stepped after termination")
        if self.round == 0:
            raise ProtocolError("step() before start()")
        self.round += 1
        rnd = self.round
        if rnd == 2:
            out = self.rotor.echo_inits(inbox)
            self.registry = SenderRegistry(inbox.senders(), frozen=True)
            self.rotor.registry = self.registry.copy()
            self.core = PhaseCore(self.input, frozenset(self.registry.members))
            return out, []

        inbox = self.registry.absorb(inbox)
        for sender, payload in inbox.items():
            if isinstance(payload, ROTOR_TYPES):
                self.rotor_buffer.add(sender, payload)
        phase, sub = phase_of(rnd)
        core = self.core
        if sub == 1:
            return [(core.send_input(), BROADCAST)], []
        if sub == 2:
            return [(core.on_inputs(inbox, core.own_fill(INPUT), rnd), BROADCAST)], []
        if sub == 3:
            return [(core.on_prefers(inbox, core.own_fill(PREFER), rnd), BROADCAST)], []
        if sub == 4:
            core.on_strongprefers(inbox, core.own_fill(STRONG), rnd)
            out: list = []
            if not self.rotor.terminated:
                buffered, self.rotor_buffer = self.rotor_buffer, RoundInbox()
                out, _ = self.rotor.step(buffered, opinion=core.x, rnd=rnd)
            self.coordinators[phase] = self.rotor.coordinator
            return out, []
        coordinator = self.coordinators.get(phase)
        c = pick_opinion(inbox, coordinator) if coordinator is not None else None
        done = core.decide(c)
        self.phase_end[phase] = core.x
        if done:
            self.terminated = True
            self.output = core.output
            return [], [Decided(core.output, rnd, phase)]
        return [], []

    def clone(self) -> "ConsensusNode":
        return copy.deepcopy(self)


def consensus_init(self_id: NodeId, value: Any):
    state = ConsensusNode(self_id, value)
    return state, state.start()


def consensus_step(state: ConsensusNode, inbox: RoundInbox):
    new = state.clone()
    outbox, events = new.step(inbox)
    return new, outbox, events
