"""Per-protocol wiring: how to build nodes for a scenario and which
properties to verify on the finished run."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Optional

from ..approx import ApproxNode
from ..broadcast import Accepted, RbNode
from ..consensus import ConsensusNode, Decided, PhaseCore, phase_of
from ..core import (BOTTOM, Absent, Event, Input, Present, Prefer, RoundInbox,
                    Tagged, ge_one_third, ge_two_thirds)
from ..dynamic import DynamicNode, first_final_round
from ..parallel import PcNode, run_subround
from ..rotor import OpinionAccepted, RotorNode
from .adversary import value_noise
from .scenario import Scenario
from .verify import Checks


@dataclass
class Setup:
    nodes: dict
    shadow_factory: Callable[[Any], Any]
    context: dict = field(default_factory=dict)
    probe: Optional[Callable] = None
    before_round: Optional[Callable] = None
    delay: Optional[Callable] = None


def ghost_ids(sc: Scenario, k: int = 2) -> list:
    top = max(sc.ids)
    return [top + 1000 + i for i in range(k)]


def two_values(values) -> list:
    distinct = sorted(set(values))
    if not distinct:
        return [0, 1]
    if len(distinct) == 1:
        v = distinct[0]
        return [v, v + 1] if isinstance(v, (int, Fraction)) else [v, f"{v}'"]
    return [distinct[0], distinct[-1]]


def outputs_key(v) -> str:
    return str(v)


# -- reliable broadcast -------------------------------------------------------

class ReliableBroadcast:
    name = "rb"
    properties = ("correctness", "unforgeability", "relay", "echo_support",
                  "quorum_spread", "registry_monotone", "registry_bounded")
    record = True

    def build(self, sc: Scenario) -> Setup:
        sender = next(n for n in sc.nodes if n.input is not None)
        body = sender.input
        values = sc.adversary_params.get("values", two_values([body]))

        def make(v):
            return RbNode(v, sender.id, body if v == sender.id else None)

        ctx = {"rb_sender": sender.id, "values": values, "forged_body": values[-1],
               "noise": value_noise(values, rb_sender=sender.id)}
        if body == values[-1]:
            ctx["forged_body"] = values[0]
        return Setup({v: make(v) for v in sc.correct}, make, ctx,
                     probe=lambda node: (frozenset(node.registry.members), node.last_echoes))

    def verify(self, sc: Scenario, truth, nodes) -> tuple:
        checks = Checks(self.properties)
        correct = sc.correct
        cset = set(correct)
        sender = next(n for n in sc.nodes if n.input is not None)
        accepted = {v: {ev.body: r for r, ev in truth.events.get(v, []) if isinstance(ev, Accepted)}
                    for v in correct}

        if sender.id in cset:
            if truth.rounds < 3:
                checks.fail("correctness", truth.rounds, "horizon ends before round 3")
            for v in correct:
                checks.expect("correctness", accepted[v] == {sender.input: 3}, accepted[v].get(sender.input),
                              lambda v=v: f"node {v} accepted {accepted[v]}, expected {{{sender.input!r}: 3}}")
            initiated = {p.body for r, s, w, p in truth.deliveries
                         if r == 1 and s == sender.id and type(p).__name__ == "Init"}
            for v in correct:
                for body, r in accepted[v].items():
                    checks.expect("unforgeability", body in initiated, r,
                                  lambda v=v, body=body: f"node {v} accepted ({body!r}, {sender.id}) "
                                                         f"which the sender never initiated")
        else:
            checks.ok("correctness", 0)
            checks.ok("unforgeability", 0)

        bodies = {b for acc in accepted.values() for b in acc}
        for body in sorted(bodies, key=repr):
            first = min(acc[body] for acc in accepted.values() if body in acc)
            if first + 1 > truth.rounds:
                continue
            for v in correct:
                r = accepted[v].get(body)
                checks.expect("relay", r is not None and r <= first + 1, first,
                              lambda v=v, r=r, body=body: f"first acceptance of {body!r} at round {first}; "
                                                          f"node {v} accepted at {r}")

        n = len(sc.nodes)
        for t in range(3, truth.rounds + 1):
            snaps = {v: truth.snapshots[v][t] for v in correct if t in truth.snapshots[v]}
            for body in {b for _, echoes in snaps.values() for b in echoes}:
                strong = False
                for v, (members, echoes) in snaps.items():
                    senders = echoes.get(body, frozenset())
                    if ge_one_third(len(senders), len(members)):
                        checks.expect("echo_support", bool(senders & cset), t,
                                      lambda v=v: f"node {v} passed one third on {body!r} with no correct echo")
                    if ge_two_thirds(len(senders), len(members)):
                        strong = True
                if strong:
                    for v, (members, echoes) in snaps.items():
                        count = len(echoes.get(body, ()))
                        checks.expect("quorum_spread", ge_one_third(count, len(members)), t,
                                      lambda v=v, count=count, members=members:
                                      f"two-thirds somewhere but node {v} saw {count}/{len(members)}")
        registry_checks(checks, truth, correct, n)

        outputs = {}
        for v in correct:
            acc = accepted[v]
            outputs[outputs_key(v)] = {
                "accepted": [{"body": b, "round": r} for b, r in sorted(acc.items(), key=repr)],
                "acceptance_round": min(acc.values()) if acc else None,
            }
        rounds = [r for acc in accepted.values() for r in acc.values()]
        spread = None
        for body in bodies:
            per_body = [acc.get(body) for acc in accepted.values()]
            if None not in per_body:
                spread = max(spread or 0, max(per_body) - min(per_body))
        metrics = {"acceptance_round": max(rounds) if rounds else None,
                   "acceptance_spread": spread}
        return checks, metrics, outputs


def registry_checks(checks: Checks, truth, correct, n: int) -> None:
    for v in correct:
        prev = None
        for t in sorted(truth.snapshots[v]):
            members = truth.snapshots[v][t][0]
            checks.expect("registry_bounded", len(members) <= n, t,
                          lambda: f"node {v} counts {len(members)} senders, population is {n}")
            if prev is not None:
                checks.expect("registry_monotone", prev <= members, t,
                              lambda: f"node {v} forgot {sorted(prev - members)}")
            prev = members


# -- rotor-coordinator --------------------------------------------------------

class RotorDriver:
    """Standalone rotor where the node's opinion is its scenario input."""

    def __init__(self, node_id, opinion, stop_rule="wrap"):
        self.node = RotorNode(node_id, stop_rule=stop_rule)
        self.opinion = opinion

    @property
    def halted(self) -> bool:
        return self.node.terminated

    def start(self):
        return self.node.start()

    def step(self, inbox):
        return self.node.step(inbox, opinion=self.opinion)


class Rotor:
    name = "rotor"
    properties = ("candidate_relay", "good_round", "termination", "correct_ids_first",
                  "registry_monotone", "registry_bounded")
    record = False

    def build(self, sc: Scenario) -> Setup:
        inputs = {n.id: n.input for n in sc.nodes}
        values = sc.adversary_params.get("values", two_values(v for v in inputs.values() if v is not None))
        ghosts = ghost_ids(sc)

        def make(v):
            return RotorDriver(v, inputs.get(v) if inputs.get(v) is not None else values[0],
                               sc.rules.get("rotor_stop", "wrap"))

        ctx = {"values": values, "ghost_ids": ghosts, "noise": value_noise(values, ghost_ids=ghosts)}

        def probe(d):
            node = d.node
            return (frozenset(node.registry.members), tuple(node.candidates), node.coordinator,
                    node.terminated, tuple(node.added_last), node.iteration)
        return Setup({v: make(v) for v in sc.correct}, make, ctx, probe=probe)

    def verify(self, sc: Scenario, truth, nodes) -> tuple:
        checks = Checks(self.properties)
        correct = sc.correct
        cset = set(correct)
        n = len(sc.nodes)
        snaps = truth.snapshots
        inputs = {s.id: s.input for s in sc.nodes}

        # The pseudocode breaks out before broadcasting, so nodes that stop in
        # round t send no echoes; relay is only owed when nobody stopped.
        stopped = {r for v in correct for r, ev in truth.events.get(v, [])
                   if type(ev).__name__ == "Terminated"}
        skipped = 0
        for v in correct:
            for t, snap in snaps[v].items():
                for p in snap[4]:
                    if t + 1 > truth.rounds:
                        continue
                    if t in stopped:
                        skipped += 1
                        continue
                    for w in correct:
                        nxt = snaps[w].get(t + 1)
                        if nxt is None:
                            continue            # w terminated earlier
                        checks.expect("candidate_relay", p in nxt[1], t,
                                      lambda w=w, p=p: f"node {v} added {p} at round {t}; node {w} "
                                                       f"lacks it at round {t + 1}")

        for v in correct:
            first = snaps[v].get(3)
            if first is None:
                checks.fail("correct_ids_first", 3, f"node {v} never made a first selection")
                continue
            missing = cset - set(first[1])
            checks.expect("correct_ids_first", not missing, 3,
                          lambda: f"node {v} selected before admitting {sorted(missing)}")

        iterations = {}
        for v in correct:
            node = nodes[v].node
            term = [r for r, ev in truth.events.get(v, []) if type(ev).__name__ == "Terminated"]
            if not term:
                checks.fail("termination", truth.rounds, f"node {v} did not terminate")
                continue
            iterations[v] = node.iteration + 1
            checks.expect("termination", iterations[v] <= n + 1, term[0],
                          lambda: f"node {v} needed {iterations[v]} iterations, bound {n + 1}")

        accepted = defaultdict(set)
        for v in correct:
            for r, ev in truth.events.get(v, []):
                if isinstance(ev, OpinionAccepted):
                    accepted[r].add((v, ev.coordinator, ev.value))
        good = None
        for t in range(3, truth.rounds):
            picks = {snaps[v][t][2] for v in correct if t in snaps[v]}
            active = all(t in snaps[v] and snaps[v][t][2] is not None for v in correct)
            if not active or len(picks) != 1:
                continue
            p = picks.pop()
            if p not in cset:
                continue
            want = {(v, p, inputs[p]) for v in correct}
            if want <= accepted[t + 1]:
                good = t
                break
        checks.expect("good_round", good is not None, None,
                      "no iteration where every correct node followed one correct coordinator")

        registry_checks(checks, truth, correct, n)
        metrics = {"max_iterations": max(iterations.values()) if iterations else None,
                   "iteration_bound": n + 1,
                   "good_round": good,
                   "relay_skipped_after_termination": skipped}
        outputs = {outputs_key(v): {"iterations": iterations.get(v),
                                    "selected": sorted(nodes[v].node.selected)} for v in correct}
        return checks, metrics, outputs


# -- consensus ----------------------------------------------------------------

class Consensus:
    name = "consensus"
    properties = ("validity", "agreement", "termination", "no_conflicting_quorums",
                  "good_round_convergence", "termination_relay", "round_bound")
    record = False

    def build(self, sc: Scenario) -> Setup:
        inputs = {n.id: n.input for n in sc.nodes}
        values = sc.adversary_params.get("values", two_values(v for v in inputs.values() if v is not None))
        ghosts = ghost_ids(sc)

        def make(v):
            return ConsensusNode(v, inputs.get(v) if inputs.get(v) is not None else values[0])

        ctx = {"values": values, "ghost_ids": ghosts, "noise": value_noise(values, ghost_ids=ghosts)}
        return Setup({v: make(v) for v in sc.correct}, make, ctx)

    def verify(self, sc: Scenario, truth, nodes) -> tuple:
        return verify_consensus(self.properties, sc, truth, nodes)


def verify_consensus(properties, sc: Scenario, truth, nodes) -> tuple:
    checks = Checks(properties)
    correct = sc.correct
    cset = set(correct)
    f = len(sc.faulty)
    decided = {}
    for v in correct:
        for r, ev in truth.events.get(v, []):
            if isinstance(ev, Decided):
                decided[v] = ev
    for v in correct:
        checks.expect("termination", v in decided, truth.rounds, lambda v=v: f"node {v} never decided")

    inputs = {sc.spec(v).input for v in correct}
    if len(inputs) == 1:
        x = next(iter(inputs))
        for v, ev in decided.items():
            checks.expect("validity", ev.value == x and ev.phase == 1, ev.round,
                          lambda ev=ev, v=v: f"unanimous {x!r} but node {v} decided {ev.value!r} "
                                             f"in phase {ev.phase}")
    else:
        checks.ok("validity", 0)

    values = {ev.value for ev in decided.values()}
    checks.expect("agreement", len(values) <= 1, max((ev.round for ev in decided.values()), default=None),
                  lambda: "decisions " + ", ".join(f"{v}->{ev.value!r}" for v, ev in sorted(decided.items())))

    quorums = defaultdict(set)
    for v in correct:
        for rnd, kind, vals in nodes[v].core.quorums:
            quorums[(rnd, kind)] |= vals
    for (rnd, kind), vals in sorted(quorums.items()):
        checks.expect("no_conflicting_quorums", len(vals) <= 1, rnd,
                      lambda vals=vals, kind=kind: f"{kind} two-thirds quorums for {sorted(vals, key=repr)}")

    # first phase with a common correct coordinator while nobody has decided yet
    phases = max((max(nodes[v].coordinators, default=0) for v in correct), default=0)
    for k in range(1, phases + 1):
        if any(v in decided and decided[v].phase < k for v in correct):
            break
        picks = {nodes[v].coordinators.get(k) for v in correct}
        if len(picks) != 1 or picks.pop() not in cset:
            continue
        ends = {v: nodes[v].phase_end.get(k) for v in correct}
        end_values = set(ends.values())
        checks.expect("good_round_convergence", len(end_values) == 1 and None not in end_values,
                      phase_start_round(k) + 4,
                      lambda: f"phase {k} had a correct coordinator but ended with {ends}")
        break

    if decided:
        first = min(decided.values(), key=lambda ev: ev.round)
        k = first.phase
        for v in correct:
            end = nodes[v].phase_end.get(k)
            checks.expect("termination_relay", end == first.value, first.round,
                          lambda v=v, end=end: f"node decided {first.value!r} in phase {k}; node {v} "
                                               f"ended phase {k} with {end!r}")
            if phase_start_round(k + 1) + 4 <= truth.rounds:
                ev = decided.get(v)
                checks.expect("termination_relay", ev is not None and ev.phase <= k + 1, first.round,
                              lambda v=v, ev=ev: f"node {v} still undecided after phase {k + 1}")

    bound = 2 + 5 * (2 * f + 3)
    last = max((ev.round for ev in decided.values()), default=truth.rounds)
    checks.expect("round_bound", last <= bound, last, lambda: f"{last} rounds exceed 2+5(2f+3)={bound}")

    metrics = {"rounds_to_decide": last, "round_bound": bound,
               "max_phase": max((ev.phase for ev in decided.values()), default=None)}
    outputs = {outputs_key(v): {"output": decided[v].value if v in decided else None,
                                "round": decided[v].round if v in decided else None,
                                "phase": decided[v].phase if v in decided else None}
               for v in correct}
    return checks, metrics, outputs


def phase_start_round(k: int) -> int:
    return 3 + 5 * (k - 1)


# -- approximate agreement ----------------------------------------------------

class Approx:
    name = "approx"
    properties = ("containment", "median_survival", "halving")
    record = False

    def build(self, sc: Scenario) -> Setup:
        inputs = {n.id: Fraction(str(n.input)) for n in sc.nodes if n.input is not None}
        lo, hi = min(inputs.values()), max(inputs.values())
        spread = max(hi - lo, Fraction(1))
        values = sc.adversary_params.get("values", [lo - 10 * spread, hi + 10 * spread])
        values = [Fraction(str(x)) for x in values]
        iterations = max(sc.rounds - 1, 0)

        def make(v):
            return ApproxNode(v, inputs.get(v, values[0]), iterations)

        pool = sorted(set(values) | set(inputs.values()))
        ctx = {"values": pool, "noise": lambda rnd, rng: [Input(rng.choice(pool))]}
        if "values" in sc.adversary_params:
            ctx["values"] = values
        return Setup({v: make(v) for v in sc.correct}, make, ctx)

    def verify(self, sc: Scenario, truth, nodes) -> tuple:
        checks = Checks(self.properties)
        correct = sc.correct
        iterations = max(len(nodes[v].history) for v in correct) - 1
        ranges = []
        for t in range(1, iterations + 1):
            ins = sorted(nodes[v].history[t - 1] for v in correct)
            outs = {v: nodes[v].history[t] for v in correct if len(nodes[v].history) > t}
            lo, hi = ins[0], ins[-1]
            medians = {ins[(len(ins) - 1) // 2], ins[len(ins) // 2]}
            rnd = t + 1
            for v, o in outs.items():
                checks.expect("containment", lo <= o <= hi, rnd,
                              lambda v=v, o=o: f"iteration {t}: node {v} output {o} outside [{lo}, {hi}]")
                s_lo, s_hi = nodes[v].trimmed[t - 1]
                for med in medians:
                    checks.expect("median_survival", s_lo <= med <= s_hi, rnd,
                                  lambda v=v, med=med, s_lo=s_lo, s_hi=s_hi:
                                  f"iteration {t}: median {med} outside node {v}'s [{s_lo}, {s_hi}]")
            if outs:
                width_in = hi - lo
                width_out = max(outs.values()) - min(outs.values())
                ok = width_out * 2 <= width_in and (width_in == 0 or width_out < width_in)
                checks.expect("halving", ok, rnd,
                              lambda: f"iteration {t}: range {width_in} -> {width_out}")
                ranges.append(str(width_out))
        metrics = {"iterations": iterations, "ranges": ranges}
        outputs = {outputs_key(v): {"trajectory": [str(x) for x in nodes[v].history]} for v in correct}
        return checks, metrics, outputs


# -- parallel consensus -------------------------------------------------------

def pairs_of(raw) -> list:
    return [(iid, value) for iid, value in (raw or [])]


class Parallel:
    name = "parallel"
    properties = ("validity", "agreement", "termination", "no_phantom_output", "phase_grid_alignment")
    record = False

    def build(self, sc: Scenario) -> Setup:
        inputs = {n.id: pairs_of(n.input) for n in sc.nodes}
        all_values = [x for pairs in inputs.values() for _, x in pairs]
        values = sc.adversary_params.get("values", two_values(all_values))
        tags = sorted({iid for pairs in inputs.values() for iid, _ in pairs}, key=repr)
        fake = sc.adversary_params.get("instance", "ghost")
        noise_tags = tags + [fake]

        def make(v):
            return PcNode(v, inputs.get(v, []))

        ctx = {"values": values, "ghost_ids": ghost_ids(sc),
               "noise": value_noise(values, ghost_ids=ghost_ids(sc), tags=noise_tags),
               "opinion_tags": lambda: noise_tags}
        return Setup({v: PcNode(v, inputs[v], record=True) for v in sc.correct}, make, ctx)

    def verify(self, sc: Scenario, truth, nodes) -> tuple:
        checks = Checks(self.properties)
        correct = sc.correct
        inputs = {v: dict(pairs_of(sc.spec(v).input)) for v in correct}
        for v in correct:
            checks.expect("termination", nodes[v].done, truth.rounds,
                          lambda v=v: f"node {v} still running {sorted(i for i, x in nodes[v].instances.items() if not x.core.terminated)}")
        common = set.intersection(*(set(p.items()) for p in inputs.values())) if inputs else set()
        for iid, x in sorted(common, key=repr):
            for v in correct:
                got = nodes[v].outputs.get(iid)
                checks.expect("validity", got == x, None,
                              lambda v=v, got=got, iid=iid, x=x: f"pair ({iid!r}, {x!r}) held by all; node {v} output {got!r}")
        seen = sorted({iid for v in correct for iid in nodes[v].outputs}, key=repr)
        for iid in seen:
            outs = {v: nodes[v].outputs.get(iid) for v in correct if nodes[v].done}
            checks.expect("agreement", len(set(outs.values())) == 1, None,
                          lambda outs=outs, iid=iid: f"instance {iid!r}: outputs {outs}")
        known = {iid for p in inputs.values() for iid in p}
        for v in correct:
            for iid in nodes[v].outputs:
                checks.expect("no_phantom_output", iid in known, None,
                              lambda v=v, iid=iid: f"node {v} output instance {iid!r} that no correct node held")
        for v in correct:
            for inst in nodes[v].instances.values():
                if inst.has_input:
                    continue
                problem = replay_bottom(nodes[v], inst)
                checks.expect("phase_grid_alignment", problem is None, inst.aware_at,
                              lambda v=v, inst=inst, problem=problem: f"node {v} instance {inst.id!r}: {problem}")
        adopted = sum(1 for v in correct for i in nodes[v].instances.values() if not i.has_input)
        discarded = sum(len(nodes[v].discarded) for v in correct)
        last = max((nodes[v].round for v in correct), default=0)
        metrics = {"rounds": last, "adopted_instances": adopted, "discarded_messages": discarded}
        outputs = {outputs_key(v): {"pairs": [[iid, x] for iid, x in sorted(nodes[v].outputs.items(), key=repr)]}
                   for v in correct}
        return checks, metrics, outputs


def replay_bottom(node: PcNode, inst) -> Optional[str]:
    """Re-run an adopted instance as if the node had started it with bottom
    input and compare the schedule from the adoption round on."""
    core = PhaseCore(BOTTOM, frozenset(node.registry.members))
    end = inst.closed_round or node.round
    for rnd in range(3, end + 1):
        phase, sub = phase_of(rnd)
        sub_inbox = inst.inboxes.get(rnd, RoundInbox())
        sent = run_subround(core, sub_inbox, phase, sub, rnd, False, node.coordinators.get(phase))
        if rnd >= inst.aware_at and sent != inst.sent.get(rnd):
            return f"round {rnd}: replay sends {sent!r}, node sent {inst.sent.get(rnd)!r}"
        if core.terminated:
            break
    if core.terminated != inst.core.terminated or core.output != inst.core.output:
        return f"replay output {core.output!r}, node output {inst.core.output!r}"
    return None


# -- dynamic total ordering ---------------------------------------------------

def submissions(raw) -> Callable[[int], Any]:
    """Schedule of events a node witnesses: ``{"every": k, "from": a, "until": b}``
    or an explicit list of ``[round, event]`` pairs."""
    if raw is None:
        return lambda t: None
    if isinstance(raw, dict):
        every, lo, hi = raw.get("every", 1), raw.get("from", 1), raw.get("until", 10**9)
        return lambda t: t if lo <= t <= hi and (t - lo) % every == 0 else None
    table = {r: e for r, e in raw}
    return table.get


class Dynamic:
    name = "dynamic"
    properties = ("chain_prefix", "append_only", "chain_growth", "round_agreement",
                  "finality_soundness", "leaver_prefix")
    reported = ("leaver_prefix",)
    record = False

    def build(self, sc: Scenario) -> Setup:
        genesis = sc.genesis()
        joins = sc.joiners()
        leaves = sc.leavers()
        schedule = {n.id: submissions(n.input) for n in sc.nodes}
        correct = set(sc.correct)

        def make(v):
            finality = sc.rules.get("finality", "settled")
            return DynamicNode(v, genesis, finality) if v in genesis else \
                DynamicNode(v, finality=finality)

        def before_round(t, engine):
            for v, r in joins.items():
                if r == t:
                    engine.add_node(v, make(v) if v in correct else None, t)
            for v, r in leaves.items():
                if r == t and v in correct and v in engine.nodes:
                    engine.nodes[v].request_leave()
            for v in correct:
                node = engine.nodes.get(v)
                if node is not None and not node.halted:
                    event = schedule[v](t)
                    if event is not None:
                        node.submit(event)

        values = sc.adversary_params.get("values", [0, 1])

        def noise(rnd, rng):
            v = rng.choice(values)
            k = max(1, rnd - rng.randint(0, 6))
            u = rng.choice(sc.ids)
            inner = [Input(v), Prefer(v), Input(BOTTOM)]
            return [Event(v, rnd), Present(), Absent()] + [Tagged(k, Tagged(u, m)) for m in inner]

        ctx = {"values": values, "noise": noise,
               "leave_at": {v: r for v, r in leaves.items() if v in sc.faulty},
               "opinion_tags": lambda: []}
        nodes = {v: make(v) for v in genesis if v in correct}
        return Setup(nodes, make, ctx, probe=lambda node: (node.r, len(node.chain)),
                     before_round=before_round)

    def verify(self, sc: Scenario, truth, nodes) -> tuple:
        checks = Checks(self.properties, reported=self.reported)
        correct = [v for v in sc.correct if v in nodes]
        leavers = set(sc.leavers())
        joined = truth.joined

        for v in correct:
            node = nodes[v]
            prev = 0
            for t, (r, length) in sorted(truth.snapshots[v].items()):
                if r is not None:
                    checks.expect("round_agreement", r == t, t,
                                  lambda r=r, t=t: f"node {v} believes it is round {r} at round {t}")
                checks.expect("append_only", length >= prev, t, lambda: f"node {v} chain shrank")
                prev = length
            late = node.late_results()
            checks.expect("append_only", not late, None,
                          lambda: f"node {v}: instances {late} produced output after being final")

        # Chains only ever grow, so mutual prefix consistency of the final
        # chains (over instances both nodes ran) implies it at every round.
        starts = {v: min(nodes[v].instances, default=10**9) for v in correct}
        for i, u in enumerate(correct):
            for w in correct[i + 1:]:
                lo = max(starts[u], starts[w])
                cu = [e for e in nodes[u].chain if e[0] >= lo]
                cw = [e for e in nodes[w].chain if e[0] >= lo]
                short, long_ = (cu, cw) if len(cu) <= len(cw) else (cw, cu)
                name = "leaver_prefix" if u in leavers or w in leavers else "chain_prefix"
                if short != long_[:len(short)]:
                    at = next(j for j, (a, b) in enumerate(zip(short, long_)) if a != b)
                    checks.fail(name, short[at][0], f"nodes {u} and {w} differ at {short[at]} vs {long_[at]}")
                else:
                    checks.ok(name)

        for v in correct:
            for k, r in nodes[v].final_at.items():
                for w in correct:
                    if k not in nodes[w].instances:
                        continue
                    closed = nodes[w].closed.get(k)
                    checks.expect("finality_soundness", closed is not None and closed <= r, r,
                                  lambda v=v, w=w, k=k, r=r, closed=closed:
                                  f"instance {k} final at node {v} in round {r}; node {w} closed it at {closed}")

        submitters = [v for v in correct if sc.spec(v).input is not None and v not in leavers]
        appended_at = {}
        for v in correct:
            for r, ev in truth.events.get(v, []):
                for entry in getattr(ev, "entries", ()):
                    appended_at[(v, entry)] = r
        growth_windows = []
        # deadline for instance k: the size-based window plus the observed
        # termination time, maximised over every instance up to k
        prefix_deadline: dict = {}
        for v in correct:
            node = nodes[v]
            running, table = 0, {}
            for j in sorted(node.snapshots):
                size = len(node.snapshots[j])
                closed = node.closed.get(j)
                if closed is None:
                    # still open; flag it once it is far older than any run can take
                    if truth.rounds - j > 2 + 5 * (size + 3):
                        checks.fail("chain_growth", j, f"instance {j} never closed at node {v}")
                    running = truth.rounds + 1
                else:
                    running = max(running, first_final_round(j, size) + closed - j)
                table[j] = running
            prefix_deadline[v] = table
        for d in submitters:
            when = submissions(sc.spec(d).input)
            for t in range(1, truth.rounds + 1):
                event = when(t)
                if event is None or joined.get(d, 1) > t:
                    continue
                k = t + 1
                for v in correct:
                    node = nodes[v]
                    if k not in node.instances or v in leavers:
                        continue
                    deadline = prefix_deadline[v][k]
                    if deadline > truth.rounds:
                        continue
                    r = appended_at.get((v, (k, d, event)))
                    growth_windows.append(deadline - k)
                    checks.expect("chain_growth", r is not None and r <= deadline, deadline,
                                  lambda v=v, k=k, r=r, deadline=deadline, event=event:
                                  f"event {event!r} of node {d} (instance {k}) reached node {v} at "
                                  f"{r}, deadline {deadline}")

        close_lag = [r - k for v in correct for k, r in nodes[v].closed.items()]
        metrics = {"rounds": truth.rounds,
                   "chain_lengths": {outputs_key(v): len(nodes[v].chain) for v in correct},
                   "max_instance_rounds": max(close_lag, default=None),
                   "max_growth_window": max(growth_windows, default=None),
                   "premature_final": sum(len(nodes[v].premature) for v in correct)}
        outputs = {outputs_key(v): {"chain": [list(e) for e in nodes[v].chain],
                                    "final_upto": nodes[v].final_upto,
                                    "halted": nodes[v].halted} for v in correct}
        return checks, metrics, outputs


# -- partition exhibit --------------------------------------------------------

class Partition:
    name = "partition_demo"
    properties = ("disagreement_exhibited",)
    reported = ("disagreement_exhibited",)
    record = False

    def build(self, sc: Scenario) -> Setup:
        block = {n.id: n.block for n in sc.nodes}
        cross = sc.cross_delay

        def delay(sender, recipient, t):
            return 1 if block[sender] == block[recipient] else cross

        def make(v):
            return ConsensusNode(v, sc.spec(v).input)
        return Setup({v: make(v) for v in sc.correct}, make, {}, delay=delay)

    def verify(self, sc: Scenario, truth, nodes) -> tuple:
        checks = Checks(self.properties, reported=self.reported)
        decided = {}
        for v in sc.correct:
            for r, ev in truth.events.get(v, []):
                if isinstance(ev, Decided):
                    decided[v] = ev
        by_block: dict = defaultdict(dict)
        for n in sc.nodes:
            ev = decided.get(n.id)
            by_block[n.block][outputs_key(n.id)] = ev.value if ev else None
        values = {ev.value for ev in decided.values()}
        checks.expect("disagreement_exhibited", len(values) > 1, None, "no disagreement")
        last_decision = max((ev.round for ev in decided.values()), default=None)
        metrics = {"cross_delay": sc.cross_delay,
                   "first_cross_arrival": 1 + sc.cross_delay,
                   "last_decision_round": last_decision,
                   "disagreement": len(values) > 1,
                   "block_outputs": {b: sorted({x for x in outs.values()}, key=repr)
                                     for b, outs in sorted(by_block.items())}}
        outputs = {outputs_key(v): {"block": sc.spec(v).block,
                                    "output": decided[v].value if v in decided else None,
                                    "round": decided[v].round if v in decided else None}
                   for v in sc.correct}
        return checks, metrics, outputs


PROTOCOLS = {p.name: p for p in (ReliableBroadcast(), Rotor(), Consensus(), Approx(), Parallel(),
                                 Dynamic(), Partition())}
