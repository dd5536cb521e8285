"""Lockstep round engine with an omniscient Byzantine adversary."""
from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from ..core import NodeId, RoundInbox, payload_to_obj

EMPTY = RoundInbox()


class ModelViolation(RuntimeError):
    """The adversary tried something the model forbids (e.g. forging an id)."""


@dataclass
class GroundTruth:
    faulty: frozenset
    inputs: dict
    deliveries: list = field(default_factory=list)        # (round_sent, sender, recipient, payload)
    events: dict = field(default_factory=lambda: defaultdict(list))     # node -> [(round, event)]
    snapshots: dict = field(default_factory=lambda: defaultdict(dict))  # node -> round -> dict
    joined: dict = field(default_factory=dict)            # node -> first round in network
    rounds: int = 0
    messages: int = 0

    @property
    def correct(self) -> list:
        return sorted(set(self.inputs) - self.faulty)

    def dump(self, fh) -> None:
        """Line-delimited delivery records with a stable field order."""
        for rnd, sender, recipient, payload in self.deliveries:
            fh.write(json.dumps({"round": rnd, "sender": sender, "recipient": recipient,
                                 "payload": payload_to_obj(payload)}) + "\n")


@dataclass
class View:
    """What the adversary sees before choosing this round's faulty messages."""
    round: int
    correct_out: list            # (sender, recipient, payload)
    byz_inbox: dict              # byzantine id -> RoundInbox
    nodes: dict                  # correct id -> state machine
    network: list
    faulty: list


def finished(node) -> bool:
    return bool(getattr(node, "halted", False))


class Engine:
    def __init__(self, nodes: dict, faulty, adversary, truth: GroundTruth,
                 delay: Optional[Callable[[NodeId, NodeId, int], int]] = None,
                 record_deliveries: bool = True,
                 probe: Optional[Callable[[Any], dict]] = None,
                 before_round: Optional[Callable[[int, "Engine"], None]] = None):
        self.nodes = dict(nodes)
        self.faulty = set(faulty)
        self.network = set(self.nodes) | self.faulty
        self.adversary = adversary
        self.truth = truth
        self.delay = delay
        self.record = record_deliveries
        self.probe = probe
        self.before_round = before_round
        self.started: set = set()
        self.pending: dict[int, list] = defaultdict(list)
        for v in self.network:
            truth.joined.setdefault(v, 1)

    # churn support
    def add_node(self, node_id: NodeId, node=None, rnd: int = 1) -> None:
        if node_id in self.network:
            raise ModelViolation(f"duplicate node id {node_id}")
        self.network.add(node_id)
        if node is None:
            self.faulty.add(node_id)
        else:
            self.nodes[node_id] = node
        self.truth.joined[node_id] = rnd

    def remove_node(self, node_id: NodeId) -> None:
        self.network.discard(node_id)

    def run(self, rounds: int) -> GroundTruth:
        for t in range(1, rounds + 1):
            if self.before_round is not None:
                self.before_round(t, self)
            self._round(t)
            self.truth.rounds = t
            if all(finished(self.nodes[v]) for v in self.nodes if v in self.network):
                break
        return self.truth

    def _round(self, t: int) -> None:
        inboxes = self._collect(t)
        network = sorted(self.network)
        recipients = frozenset(network)
        common = RoundInbox()
        extras: dict = defaultdict(list)
        correct_out = []
        for v in network:
            node = self.nodes.get(v)
            if node is None or finished(node):
                continue
            if v not in self.started:
                self.started.add(v)
                outbox, events = node.start(), []
            else:
                outbox, events = node.step(inboxes.get(v, EMPTY))
            for ev in events:
                self.truth.events[v].append((t, ev))
            if self.probe is not None:
                self.truth.snapshots[v][t] = self.probe(node)
            for payload, to in outbox:
                correct_out.append((v, to, payload))
                if to is None:
                    common.add(v, payload)
                elif to in recipients:
                    extras[to].append((v, payload))

        byz = sorted(self.faulty & self.network)
        view = View(t, correct_out, {b: inboxes.get(b, EMPTY) for b in byz},
                    self.nodes, network, byz)
        for sender, per_recipient in sorted(self.adversary.act(view).items()):
            if sender not in self.faulty or sender not in self.network:
                raise ModelViolation(f"adversary attempted to send as {sender}")
            for recipient in sorted(per_recipient):
                if recipient in recipients:
                    extras[recipient].extend((sender, p) for p in per_recipient[recipient])

        if self.delay is not None:
            self._delayed(t, common, recipients, extras)
            return
        self.pending[t + 1].append((common, recipients, extras))
        self.truth.messages += len(common) * len(recipients) + sum(map(len, extras.values()))
        if self.record:
            log = self.truth.deliveries
            for sender, payload in common.items():
                for w in network:
                    log.append((t, sender, w, payload))
            for w in sorted(extras):
                for sender, payload in extras[w]:
                    log.append((t, sender, w, payload))

    def _delayed(self, t, common, recipients, extras) -> None:
        edges = [(s, w, p) for s, p in common.items() for w in sorted(recipients)]
        edges += [(s, w, p) for w in sorted(extras) for s, p in extras[w]]
        for sender, recipient, payload in edges:
            d = self.delay(sender, recipient, t)
            self.pending[t + d].append((RoundInbox(), frozenset(), {recipient: [(sender, payload)]}))
            if self.record:
                self.truth.deliveries.append((t, sender, recipient, payload))
        self.truth.messages += len(edges)

    def _collect(self, t: int) -> dict:
        batches = self.pending.pop(t, ())
        inboxes: dict = {}
        for v in self.network:
            parts = [(common if v in rcpt else None, extras.get(v, ()))
                     for common, rcpt, extras in batches if v in rcpt or v in extras]
            if not parts:
                continue
            if len(parts) == 1 and parts[0][0] is not None and not parts[0][1]:
                inboxes[v] = parts[0][0]          # shared between recipients, read-only
                continue
            box = None
            for common, extra in parts:
                if common is not None:
                    if box is None:
                        box = common.copy()
                    else:
                        for sender, payload in common.items():
                            box.add(sender, payload)
                if box is None:
                    box = RoundInbox()
                for sender, payload in extra:
                    box.add(sender, payload)
            inboxes[v] = box
        return inboxes
