import pytest

from idonly.core import Absent, Ack, Present, RoundInbox
from idonly.dynamic import (DynamicNode, JoinFailed, dto_step, first_final_round, is_final, join,
                            leave)
from idonly.sim import run_scenario
from idonly.sim import generate as g
from helpers import lockstep

IDS = (3, 11, 12, 40)


def test_join_majority_with_outlier():
    r, view = join(7, [(10, "a"), (10, "b"), (10, "c"), (99, "z")])
    assert r == 11 and view == {"a", "b", "c", "z"}


def test_join_unanimous():
    assert join(7, [(10, "a"), (10, "b"), (10, "c")]) == (11, {"a", "b", "c"})


def test_join_without_majority_fails():
    with pytest.raises(JoinFailed):
        join(7, [(10, "a"), (11, "b")])


def test_finality_window_arithmetic():
    assert not is_final(32, 20, 4) and is_final(33, 20, 4)
    assert first_final_round(20, 4) == 33
    assert not is_final(29, 20, 3) and is_final(30, 20, 3)


def test_unknown_finality_rule():
    with pytest.raises(ValueError):
        DynamicNode(1, IDS, finality="eventually")


def _cluster(**kw):
    return {v: DynamicNode(v, IDS, **kw) for v in IDS}


def test_event_reaches_every_chain_after_the_window():
    nodes = _cluster()
    seen = {}

    def before(rnd):
        if rnd == 19:
            nodes[11].submit("e")
        for v, node in nodes.items():
            if (20, 11, "e") in node.chain and v not in seen:
                seen[v] = rnd - 1

    lockstep(nodes, 40, before=before)
    for v, node in nodes.items():
        assert (20, 11, "e") in node.chain
        closed = node.closed[20]
        assert seen[v] == max(first_final_round(20, 4), closed + 5)
        assert node.final_at[20] == seen[v]


def test_window_rule_alone_finalizes_at_the_window():
    nodes = _cluster(finality="window")
    lockstep(nodes, 40)
    assert all(node.final_at[20] == 33 for node in nodes.values())


def test_quiet_system_keeps_advancing_with_empty_chains():
    nodes = _cluster()
    lockstep(nodes, 30)
    for node in nodes.values():
        assert node.chain == [] and node.final_upto is not None and node.final_upto >= 10


def test_leaver_drains_outstanding_instances():
    nodes = _cluster()
    halted_at = {}

    def before(rnd):
        if rnd == 10:
            nodes[40].request_leave()
        if nodes[40].halted and 40 not in halted_at:
            halted_at[40] = rnd - 1

    lockstep(nodes, 30, before=before)
    leaver = nodes[40]
    assert leaver.left_at == 10 and leaver.halted
    assert max(leaver.instances) == 9
    assert all(k in leaver.closed for k in leaver.instances)
    for v in (3, 11, 12):
        assert 40 in nodes[v].snapshots[10] and 40 not in nodes[v].snapshots[11]


def test_leave_without_outstanding_instances_halts():
    node = DynamicNode(5, [5, 6])
    node.start()
    new, out = leave(node)
    assert out == [(Absent(), None)]
    assert new.leaving and not node.leaving


def test_dto_step_returns_chain_delta_and_keeps_input():
    node = DynamicNode(5, [5])
    node.start()
    new, out, delta = dto_step(node, RoundInbox(), own_event="x")
    assert node.r == 1 and new.r == 2 and delta == []


def test_joiner_learns_round_and_view():
    node = DynamicNode(9)
    assert node.start() == [(Present(), None)]          # sent in round 13
    node.step(RoundInbox())                              # acks are being sent in round 14
    node.step(RoundInbox([(u, Ack(14)) for u in IDS]))
    assert node.joined and node.r == 15 and node.view == set(IDS) | {9}


@pytest.mark.parametrize("adversary", ["churn_liar", "equivocator", "random"])
def test_generated_churn_schedules(adversary):
    result = run_scenario(g.dynamic(3, rounds=100, adversary=adversary))
    assert result.verdict.passed, result.verdict.failures()
