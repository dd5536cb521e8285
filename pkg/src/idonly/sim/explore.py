"""Exhaustive adversary exploration for reliable broadcast on tiny systems.

Every Byzantine node chooses, per round and per correct recipient, one option
from a small alphabet (stay silent, just be present, or send the echoes and
round-one bodies of at most two distinct bodies).  Branches that lead to the
same joint state of the correct nodes are merged, so the whole schedule tree
is covered while only distinct states are expanded.  Schedule counts are kept
with multiplicity.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

from ..broadcast import RbNode
from ..core import Echo, Init, Present, RoundInbox
from .verify import Checks, Verdict

MAX_N = 5
MAX_HORIZON = 8
DEFAULT_CAP = 10**9
PROPERTIES = ("correctness", "unforgeability", "relay")

# first-acceptance age of a body among correct nodes
NONE, FRESH, OLD = 0, 1, 2


class ExplorationTooLarge(RuntimeError):
    def __init__(self, estimate: int, cap: int, reason: str = ""):
        what = f"estimated {estimate:,} transitions"
        super().__init__(f"{what}: {reason}" if reason else f"{what} exceeds the cap of {cap:,}")
        self.estimate = estimate
        self.cap = cap


@dataclass
class Exploration:
    n: int
    f: int
    horizon: int
    byzantine_sender: bool
    verdict: Verdict
    schedules: int
    violating_schedules: int
    states: int
    estimate: int

    def to_obj(self) -> dict:
        return {"n": self.n, "f": self.f, "horizon": self.horizon,
                "byzantine_sender": self.byzantine_sender,
                "schedules": self.schedules, "violating_schedules": self.violating_schedules,
                "states": self.states, "estimate": self.estimate,
                "verdict": self.verdict.to_obj()}


def options(rnd: int, byz_is_sender: bool, sender: int, bodies) -> list:
    """Per-(Byzantine node, recipient) choices for messages sent in round ``rnd``."""
    if rnd == 1:
        opts = [(), (Present(),)]
        if byz_is_sender:
            inits = [Init(b) for b in bodies]
            opts += [tuple(c) for k in range(1, len(inits) + 1)
                     for c in itertools.combinations(inits, k)]
        return opts
    echoes = [Echo(sender, b) for b in bodies]
    return [(), (Present(),)] + [tuple(c) for k in range(1, len(echoes) + 1)
                                 for c in itertools.combinations(echoes, k)]


def estimate_work(n: int, f: int, horizon: int, byzantine_sender: bool, bodies=(0, 1)) -> int:
    """Upper bound on the transitions the explorer would enumerate."""
    g = n - f
    b = len(bodies)
    per_node = 2 ** f * 2 ** b * 2 ** b          # byzantine registry members, accepted, echoing
    state_bound = per_node ** g * 3 ** b
    total, frontier = 0, 1
    for rnd in range(1, horizon):
        choices = len(options(rnd, byzantine_sender, 0, bodies)) ** (f * g)
        total += frontier * choices
        frontier = min(state_bound, frontier * choices)
    return total


def explore_rb(n: int, f: int, horizon: int, byzantine_sender: bool = False,
               bodies=(0, 1), cap: int = DEFAULT_CAP) -> Exploration:
    """Enumerate every adversary schedule up to ``horizon`` rounds.

    Properties are checked on every branch; a branch is cut at its first
    violation.  Systems with ``n <= 3f`` are allowed and serve as negative
    controls.
    """
    if n < 1 or not 0 <= f < n:
        raise ValueError("need n >= 1 and 0 <= f < n")
    if horizon < 2:
        raise ValueError("horizon must be at least 2")
    if byzantine_sender and f == 0:
        raise ValueError("a Byzantine sender needs f >= 1")
    if not 1 <= len(bodies) <= 2 or len(set(bodies)) != len(bodies):
        raise ValueError("the body alphabet holds one or two distinct bodies")
    estimate = estimate_work(n, f, horizon, byzantine_sender, bodies)
    if n > MAX_N or horizon > MAX_HORIZON:
        raise ExplorationTooLarge(estimate, cap,
                                  f"the explorer is limited to n <= {MAX_N} and horizon <= {MAX_HORIZON}")
    if estimate > cap:
        raise ExplorationTooLarge(estimate, cap)

    g = n - f
    correct = list(range(1, g + 1))
    byzantine = list(range(g + 1, n + 1))
    sender = byzantine[0] if byzantine_sender else correct[0]
    own_body = bodies[0]
    checks = Checks(PROPERTIES)
    if byzantine_sender:
        checks.ok("correctness", 0)

    nodes = tuple(RbNode(v, sender, own_body if v == sender else None) for v in correct)
    inflight = tuple(frozenset(p for p, _ in node.start()) for node in nodes)
    start = _key(nodes, inflight, (NONE,) * len(bodies))
    frontier = {start: (1, nodes, inflight, (NONE,) * len(bodies))}
    parent: dict = {start: None}
    violating = 0
    pairs = [(b, v) for b in byzantine for v in correct]
    seen = 1

    def opts_of(rnd):
        return options(rnd, byzantine_sender, sender, bodies)

    for rnd in range(1, horizon):
        opts = opts_of(rnd)
        tail = 1
        for later in range(rnd + 1, horizon):
            tail *= len(opts_of(later)) ** len(pairs)
        nxt: dict = {}
        for key, (mult, nodes, inflight, ages) in frontier.items():
            common = RoundInbox()
            for u, sent in zip(correct, inflight):
                for p in sent:
                    common.add(u, p)
            # each recipient's next state depends only on what it receives
            per_recipient = []
            for idx, v in enumerate(correct):
                outcomes = []
                for combo in itertools.product(range(len(opts)), repeat=len(byzantine)):
                    inbox = common.copy()
                    for b, o in zip(byzantine, combo):
                        for p in opts[o]:
                            inbox.add(b, p)
                    node = nodes[idx].clone()
                    out, events = node.step(inbox)
                    outcomes.append((combo, node, frozenset(p for p, _ in out), events))
                per_recipient.append(outcomes)
            for choice in itertools.product(*per_recipient):
                new_nodes = tuple(c[1] for c in choice)
                new_inflight = tuple(c[2] for c in choice)
                step_round = rnd + 1
                problem = _check(checks, step_round, sender, own_body, byzantine_sender,
                                 new_nodes, ages, bodies, choice, correct)
                if problem:
                    violating += mult * tail
                    name, what = problem
                    if checks[name].passed:
                        what += "; schedule " + _trace(parent, key, rnd,
                                                       tuple(c[0] for c in choice), correct,
                                                       byzantine, opts_of)
                    checks.fail(name, step_round, what)
                    continue
                new_ages = _age(ages, new_nodes, bodies)
                nkey = _key(new_nodes, new_inflight, new_ages)
                if nkey in nxt:
                    nxt[nkey] = (nxt[nkey][0] + mult,) + nxt[nkey][1:]
                else:
                    nxt[nkey] = (mult, new_nodes, new_inflight, new_ages)
                    if nkey not in parent:
                        parent[nkey] = (key, rnd, tuple(c[0] for c in choice))
        frontier = nxt
        seen += len(nxt)

    schedules = 1
    for rnd in range(1, horizon):
        schedules *= len(opts_of(rnd)) ** len(pairs)
    verdict = Verdict("rb_explore", checks.all(),
                      {"schedules": schedules, "violating_schedules": violating, "states": seen})
    return Exploration(n, f, horizon, byzantine_sender, verdict, schedules, violating, seen,
                       estimate)


def _key(nodes, inflight, ages) -> tuple:
    return (tuple(node.key() for node in nodes), inflight, ages)


def _age(ages, nodes, bodies) -> tuple:
    out = []
    for b, age in zip(bodies, ages):
        if age == NONE:
            out.append(FRESH if any(b in node.accepted for node in nodes) else NONE)
        else:
            out.append(OLD)
    return tuple(out)


def _check(checks: Checks, rnd, sender, own_body, byzantine_sender, nodes, ages, bodies,
           choice, correct) -> Optional[tuple]:
    for node, (_, _, _, events) in zip(nodes, choice):
        for ev in events:
            if not byzantine_sender and ev.body != own_body:
                return "unforgeability", f"node {node.self_id} accepted forged body {ev.body!r}"
    if not byzantine_sender:
        checks.ok("unforgeability")
    if not byzantine_sender and rnd == 3:
        late = [node.self_id for node in nodes if node.accepted.get(own_body) != 3]
        if late:
            return "correctness", f"nodes {late} did not accept the sender's body in round 3"
        checks.ok("correctness")
    for b, age in zip(bodies, ages):
        if age == NONE:
            continue
        missing = [node.self_id for node in nodes if b not in node.accepted]
        if missing:
            return "relay", f"body {b!r} accepted before round {rnd - 1} but nodes {missing} still lack it"
        checks.ok("relay")
    return None


def _trace(parent, key, rnd, combo, correct, byzantine, opts_of) -> str:
    steps = [(rnd, combo)]
    while parent.get(key) is not None:
        key, r, prev = parent[key]
        steps.append((r, prev))
    parts = []
    for r, per_recipient in reversed(steps):
        opts = opts_of(r)
        sent = [f"{b}->{v}:{'+'.join(map(repr, opts[o]))}"
                for v, per_byz in zip(correct, per_recipient)
                for b, o in zip(byzantine, per_byz) if opts[o]]
        parts.append(f"r{r}[{', '.join(sent) or '-'}]")
    return " ".join(parts)
