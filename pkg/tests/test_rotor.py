import pytest

from idonly.core import Echo, Init, Opinion, RoundInbox
from idonly.rotor import OpinionAccepted, RotorNode, Terminated, rotor_init, rotor_step
from idonly.sim import run_scenario
from idonly.sim import generate as g
from helpers import lockstep

IDS = (5, 9, 12)


def test_init_broadcast():
    _, out = rotor_init(3)
    assert out == [(Init(), None)]


def test_round_two_echoes_every_init():
    state, _ = rotor_init(1)
    state, out, _ = rotor_step(state, RoundInbox([(a, Init()) for a in (4, 2, 8)]), 0)
    assert out == [(Echo(2), None), (Echo(4), None), (Echo(8), None)]


def test_round_two_silence_means_no_echoes():
    state, _ = rotor_init(1)
    _, out, _ = rotor_step(state, RoundInbox(), 0)
    assert out == []


def test_three_node_rotation():
    nodes = {v: RotorNode(v) for v in IDS}
    opinions = {5: "a", 9: "b", 12: "c"}
    events = lockstep(nodes, 8, step=lambda n, inbox: n.step(inbox, opinions[n.self_id]))
    for v in IDS:
        assert nodes[v].candidates == [5, 9, 12]
        assert events[v] == [OpinionAccepted(5, "a", 4), OpinionAccepted(9, "b", 5),
                             OpinionAccepted(12, "c", 6), Terminated(6)]
        assert nodes[v].iteration == 3


def test_coordinator_sends_own_opinion():
    state, _ = rotor_init(5)
    state, _, _ = rotor_step(state, RoundInbox([(a, Init()) for a in IDS]), 1)
    echoes = RoundInbox([(u, Echo(p)) for u in IDS for p in IDS])
    _, out, _ = rotor_step(state, echoes, 1)
    assert (Opinion(1), None) in out


def test_weak_echo_support_changes_nothing():
    state, _ = rotor_init(5)
    state, _, _ = rotor_step(state, RoundInbox([(a, Init()) for a in IDS]), 1)
    inbox = RoundInbox([(u, Echo(p)) for u in IDS for p in IDS] + [(99, Echo(77))])
    state, out, _ = rotor_step(state, inbox, 1)
    assert 77 not in state.candidates and (Echo(77), None) not in out


def test_unknown_stop_rule():
    with pytest.raises(ValueError):
        RotorNode(1, stop_rule="never")


def _late_smaller_candidate(stop_rule):
    node = RotorNode(9, stop_rule=stop_rule)
    node.start()
    node.step(RoundInbox([(a, Init()) for a in IDS]))
    node.step(RoundInbox([(u, Echo(p)) for u in IDS for p in IDS]))      # picks 5
    _, events = node.step(RoundInbox([(u, Echo(3)) for u in IDS]))       # 3 admitted late
    return node, events


def test_reselect_stops_early_when_positions_shift():
    node, events = _late_smaller_candidate("reselect")
    assert node.candidates == [3, 5, 9, 12]
    assert events == [Terminated(4)] and node.selected == {5}


def test_wrap_keeps_rotating_when_positions_shift():
    node, events = _late_smaller_candidate("wrap")
    assert events == [] and node.coordinator == 5 and node.iteration == 2


def test_reselect_counterexample_loses_the_good_round():
    sc = g.rotor(10, 10, "random")
    assert run_scenario(sc).verdict.passed
    sc.rules = {"rotor_stop": "reselect"}
    failed = [c.name for c in run_scenario(sc).verdict.failures()]
    assert failed == ["good_round"]
