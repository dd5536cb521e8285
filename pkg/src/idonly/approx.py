"""One-round trimmed-midpoint approximate agreement, in exact rationals."""
from __future__ import annotations

from fractions import Fraction
from typing import Callable, Iterable, Mapping, Optional

from .core import BROADCAST, Input, NodeId, ProtocolError, RoundInbox


def aa_trim(values: Iterable) -> list:
    """Sort and drop the ``n // 3`` smallest and ``n // 3`` largest values."""
    ordered = sorted(values)
    if not ordered:
        raise ValueError("cannot trim an empty multiset")
    k = len(ordered) // 3
    return ordered[k:len(ordered) - k]


def aa_output(values: Iterable) -> Fraction:
    kept = aa_trim(values)
    return (Fraction(kept[0]) + Fraction(kept[-1])) / 2


def received_values(inbox: RoundInbox) -> list:
    """One value per sender; a sender offering several keeps only its smallest."""
    values = []
    for sender in sorted(inbox.senders()):
        offered = [p.value for p in inbox.payloads(sender) if isinstance(p, Input)]
        if offered:
            values.append(min(offered))
    return values


class ApproxNode:
    """Repeats the one-round primitive, feeding each output back as the next input."""

    def __init__(self, self_id: NodeId, value, iterations: int):
        self.self_id = self_id
        self.value = Fraction(value)
        self.iterations = iterations
        self.history: list[Fraction] = [self.value]
        self.trimmed: list[tuple[Fraction, Fraction]] = []
        self.round = 0
        self.halted = iterations == 0

    def start(self) -> list:
        if self.round != 0:
            raise ProtocolError("start() called twice")
        self.round = 1
        return [] if self.halted else [(Input(self.value), BROADCAST)]

    def step(self, inbox: RoundInbox) -> tuple[list, list]:
        if self.halted:
            raise ProtocolError(f"node {self.self_id} stepped after its last iteration")
        self.round += 1
        values = received_values(inbox)
        if not values:
            values = [self.value]
        kept = aa_trim(values)
        self.trimmed.append((Fraction(kept[0]), Fraction(kept[-1])))
        self.value = (Fraction(kept[0]) + Fraction(kept[-1])) / 2
        self.history.append(self.value)
        if len(self.history) > self.iterations:
            self.halted = True
            return [], []
        return [(Input(self.value), BROADCAST)], []


def aa_iterate(inputs: Mapping[NodeId, object], rounds: int,
               extra: Optional[Callable[[int, NodeId, dict], list]] = None) -> dict[NodeId, list]:
    """Run ``rounds`` lockstep iterations among the given correct nodes.

    ``extra(round, node, current)`` returns the additional (faulty) values
    that ``node`` receives in that round; by default there are none.
    """
    current = {v: Fraction(x) for v, x in inputs.items()}
    traj = {v: [x] for v, x in current.items()}
    for rnd in range(1, rounds + 1):
        nxt = {}
        for v in sorted(current):
            received = list(current.values())
            if extra is not None:
                received += [Fraction(x) for x in extra(rnd, v, dict(current))]
            nxt[v] = aa_output(received)
        current = nxt
        for v, x in current.items():
            traj[v].append(x)
    return traj
