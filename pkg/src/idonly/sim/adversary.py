"""Byzantine strategies.

Every faulty node carries an honest *shadow* copy of the protocol that it
feeds with its real inbox; most strategies start from what the shadow would
send and then distort, withhold or add messages per recipient.
"""
from __future__ import annotations

import dataclasses
import random
from typing import Any, Callable, Optional

from ..core import (BOTTOM, Absent, Echo, Event, Init, Input, NoPreference,
                    NoStrongPreference, Opinion, Prefer, Present, ProtocolError,
                    RoundInbox, StrongPrefer, Tagged)
from ..consensus import phase_of, phase_start
from .engine import View

VALUE_FIELDS = {Opinion: "value", Input: "value", Prefer: "value", StrongPrefer: "value",
                Init: "body", Echo: "body", Event: "body"}


def replace_value(payload, value):
    """Same message with its carried value swapped; payloads without one are returned as is."""
    if isinstance(payload, Tagged):
        return Tagged(payload.tag, replace_value(payload.payload, value))
    name = VALUE_FIELDS.get(type(payload))
    if name is None or getattr(payload, name) is None:
        return payload
    return dataclasses.replace(payload, **{name: value})


def carried_value(payload):
    if isinstance(payload, Tagged):
        return carried_value(payload.payload)
    name = VALUE_FIELDS.get(type(payload))
    return getattr(payload, name) if name else None


def is_opinion(payload) -> bool:
    if isinstance(payload, Tagged):
        return is_opinion(payload.payload)
    return isinstance(payload, Opinion)


class Shadow:
    """Honest protocol copy run on behalf of one faulty node."""

    def __init__(self, node):
        self.node = node
        self.alive = True
        self.started = False

    def advance(self, inbox: RoundInbox) -> list:
        if not self.alive or getattr(self.node, "halted", False):
            return []
        try:
            if not self.started:
                self.started = True
                return list(self.node.start())
            out, _ = self.node.step(inbox)
            return list(out)
        except (ProtocolError, RuntimeError, ValueError):
            # the honest code gave up on an inbox only a faulty node can see
            self.alive = False
            return []


class Strategy:
    """Base strategy: honest shadow behaviour, per recipient."""

    name = "honest"

    def __init__(self, params: dict, rng: random.Random, context: dict):
        self.params = params
        self.rng = rng
        self.ctx = context

    def act(self, node_id, rnd: int, shadow_out: list, view: View) -> dict:
        return deliver(shadow_out, view.network)


def deliver(outbox: list, network) -> dict:
    per: dict = {}
    for payload, to in outbox:
        targets = network if to is None else [to]
        for w in targets:
            per.setdefault(w, []).append(payload)
    return per


def halves(network) -> tuple[list, list]:
    ordered = sorted(network)
    mid = len(ordered) // 2
    return ordered[:mid], ordered[mid:]


class Silent(Strategy):
    name = "silent"

    def act(self, node_id, rnd, shadow_out, view):
        return {}


class CrashAt(Strategy):
    name = "crash_at"

    def act(self, node_id, rnd, shadow_out, view):
        if rnd >= self.params.get("round", 1):
            return {}
        return deliver(shadow_out, view.network)


class Equivocator(Strategy):
    """Honest timing, but recipients in the lower half see one value and the rest another."""
    name = "equivocator"

    def act(self, node_id, rnd, shadow_out, view):
        low_value, high_value = self.params.get("values", self.ctx.get("values", [0, 1]))[:2]
        low, _ = halves(view.network)
        low = set(low)
        per: dict = {}
        for payload, to in shadow_out:
            targets = view.network if to is None else [to]
            for w in targets:
                value = low_value if w in low else high_value
                per.setdefault(w, []).append(replace_value(payload, value))
        return per


class EchoForger(Strategy):
    """Adds echoes for messages nobody sent: a forged body for the broadcast
    sender and candidate ids that do not exist."""
    name = "echo_forger"

    def act(self, node_id, rnd, shadow_out, view):
        per = deliver(shadow_out, view.network)
        forged = []
        sender = self.ctx.get("rb_sender")
        if sender is not None:
            forged.append(Echo(sender, self.params.get("body", self.ctx.get("forged_body", -1))))
        for origin in self.params.get("origins", self.ctx.get("ghost_ids", [])):
            forged.append(Echo(origin))
        if rnd >= 2:
            for w in view.network:
                per.setdefault(w, []).extend(forged)
        return per


class PartialPresence(Strategy):
    """Announces itself only to part of the network in the first round."""
    name = "partial_presence"

    def act(self, node_id, rnd, shadow_out, view):
        if rnd == 1:
            ordered = sorted(view.network)
            keep = max(1, int(len(ordered) * self.params.get("fraction", 0.5)))
            if keep >= len(ordered):
                keep = len(ordered) - 1
            return deliver(shadow_out, ordered[:keep])
        return deliver(shadow_out, view.network)


class OpinionSplitter(Strategy):
    """Sends conflicting coordinator opinions to the two halves of the network, every round."""
    name = "opinion_splitter"

    def act(self, node_id, rnd, shadow_out, view):
        values = self.params.get("values", self.ctx.get("values", [0, 1]))
        low, high = halves(view.network)
        per: dict = {}
        for payload, to in shadow_out:
            if is_opinion(payload):
                continue
            for w in (view.network if to is None else [to]):
                per.setdefault(w, []).append(payload)
        tags = self.ctx.get("opinion_tags", lambda: [None])()
        for tag in tags:
            for group, value in ((low, values[0]), (high, values[1])):
                message = Opinion(value) if tag is None else Tagged(tag, Opinion(value))
                for w in group:
                    per.setdefault(w, []).append(message)
        return per


#: message kind a faulty node uses for an instance message landing at each subround
LANDING_KIND = {2: Input, 3: Prefer, 4: StrongPrefer}
#: the strongprefer "heard at subround 5" is delivered at 4 and processed at 5
LANDING_SUB = {2: 2, 3: 3, 5: 4}


class FakeInstanceInjector(Strategy):
    """Introduces an instance id no correct node holds, first heard at a chosen
    (phase, subround), and keeps pushing a value for it afterwards."""
    name = "fake_instance_injector"

    def act(self, node_id, rnd, shadow_out, view):
        per = deliver(shadow_out, view.network)
        phase = self.params.get("phase", 1)
        sub = self.params.get("sub", 2)
        offset = self.ctx.get("offset", 0)
        first_landing = offset + phase_start(phase) + LANDING_SUB.get(sub, sub) - 1
        landing = rnd + 1
        if landing < first_landing or landing - offset < 3:
            return per
        kind = LANDING_KIND.get(phase_of(landing - offset)[1])
        if kind is None:
            return per
        wrap = self.ctx.get("wrap", lambda p: p)
        message = wrap(Tagged(self.params.get("instance", "ghost"), kind(self.params.get("value", 1))))
        targets = self.params.get("targets")
        for w in (view.network if targets is None else [t for t in targets if t in view.network]):
            per.setdefault(w, []).append(message)
        return per


class ChurnLiar(Strategy):
    """Tells only part of the network that it is leaving, then keeps participating."""
    name = "churn_liar"

    def act(self, node_id, rnd, shadow_out, view):
        per = deliver(shadow_out, view.network)
        if rnd == self.params.get("round", 5):
            low, _ = halves(view.network)
            for w in low:
                per.setdefault(w, []).append(Absent())
        return per


class RandomStrategy(Strategy):
    """Seeded noise: drops, value swaps and injected protocol messages per recipient."""
    name = "random"

    def act(self, node_id, rnd, shadow_out, view):
        p = self.params.get("intensity", 0.5)
        values = self.ctx.get("values", [0, 1])
        noise: Callable[[int, random.Random], list] = self.ctx.get("noise", lambda r, g: [])
        pool = []
        for payload, to in shadow_out:
            pool.append((payload, to))
            if carried_value(payload) is not None:
                pool.append((replace_value(payload, self.rng.choice(values)), to))
        pool.extend((payload, None) for payload in noise(rnd, self.rng))
        per: dict = {}
        for w in view.network:
            for payload, to in pool:
                if to is not None and to != w:
                    continue
                if self.rng.random() < p:
                    per.setdefault(w, []).append(payload)
        return per


CATALOG = {cls.name: cls for cls in (Silent, CrashAt, Equivocator, EchoForger, PartialPresence,
                                     OpinionSplitter, FakeInstanceInjector, ChurnLiar,
                                     RandomStrategy)}


class Adversary:
    """Drives every faulty node with one strategy and its own shadow."""

    def __init__(self, name: str, params: Optional[dict], seed: int,
                 shadow_factory: Callable[[Any], Any], context: Optional[dict] = None):
        if name not in CATALOG:
            raise ValueError(f"unknown adversary strategy {name!r}")
        self.rng = random.Random(seed)
        self.strategy = CATALOG[name](dict(params or {}), self.rng, context or {})
        self.factory = shadow_factory
        self.shadows: dict = {}
        self.leave_at: dict = dict((context or {}).get("leave_at", {}))

    def act(self, view: View) -> dict:
        out: dict = {}
        for b in view.faulty:
            shadow = self.shadows.get(b)
            if shadow is None:
                shadow = self.shadows[b] = Shadow(self.factory(b))
            shadow_out = shadow.advance(view.byz_inbox.get(b, RoundInbox()))
            leave = self.leave_at.get(b)
            if leave is not None and view.round >= leave:
                if view.round == leave:
                    out[b] = {w: [Absent()] for w in view.network}
                continue
            per = self.strategy.act(b, view.round, shadow_out, view)
            if per:
                out[b] = per
        return out


def value_noise(values, *, rb_sender=None, ghost_ids=(), tags=()) -> Callable:
    """Message generator for the random strategy, built per protocol."""
    def noise(rnd: int, rng: random.Random) -> list:
        msgs: list = []
        v = rng.choice(values)
        if rb_sender is not None:
            msgs += [Init(v), Echo(rb_sender, v)]
        else:
            msgs += [Init(), Present()]
        for g in ghost_ids:
            msgs.append(Echo(g))
        base = [Input(v), Prefer(v), StrongPrefer(v), Opinion(v), NoPreference(),
                NoStrongPreference(), Input(BOTTOM), Prefer(BOTTOM)]
        if tags:
            for tag in tags:
                msgs += [Tagged(tag, m) for m in base]
        elif rb_sender is None:
            msgs += base
        return msgs
    return noise
