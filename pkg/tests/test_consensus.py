import pytest

from idonly.consensus import (ConsensusNode, Decided, INPUT, PREFER, consensus_init,
                              consensus_step, phase_of, substitute_missing)
from idonly.core import Init, Input, Prefer, ProtocolError, RoundInbox
from idonly.sim import run_scenario
from idonly.sim import generate as g
from helpers import lockstep


def _after_init(v, senders, value=1):
    state, _ = consensus_init(v, value)
    state, _, _ = consensus_step(state, RoundInbox([(u, Init()) for u in senders]))
    return state


def test_registry_freezes_on_init_senders():
    state = _after_init(1, (1, 2, 3, 4))
    assert state.registry.frozen and state.registry.n == 4


def test_silent_node_is_excluded_for_good():
    state = _after_init(1, (1, 2, 3))
    assert 4 not in state.registry
    state, _, _ = consensus_step(state, RoundInbox([(4, Input(0))]))
    assert state.registry.n == 3


def test_input_becomes_opinion():
    assert _after_init(1, (1, 2), value=1).x == 1


def test_substitution_repeats_last_message():
    inbox = RoundInbox([(1, Prefer(0))])
    out = substitute_missing(inbox, {1, 2}, PREFER, Prefer(1))
    assert out.payloads(2) == (Prefer(1),) and out.payloads(1) == (Prefer(0),)


def test_substitution_without_history_is_identity():
    inbox = RoundInbox([(1, Prefer(0))])
    assert substitute_missing(inbox, {1, 2}, PREFER, None) is inbox


def test_substitution_with_everyone_present_is_identity():
    inbox = RoundInbox([(1, Input(0)), (2, Input(1))])
    out = substitute_missing(inbox, {1, 2}, INPUT, Input(5))
    assert sorted(out.items(), key=repr) == sorted(inbox.items(), key=repr)


def test_phase_layout():
    assert phase_of(3) == (1, 1) and phase_of(7) == (1, 5) and phase_of(8) == (2, 1)
    with pytest.raises(ValueError):
        phase_of(2)


def test_unanimous_decides_at_end_of_first_phase():
    nodes = {v: ConsensusNode(v, 1) for v in (3, 8, 20, 21)}
    events = lockstep(nodes, 7)
    assert all(evs == [Decided(1, 7, 1)] for evs in events.values())


def test_silent_fault_mixed_inputs_agree_within_two_phases():
    nodes = {v: ConsensusNode(v, x) for v, x in ((2, 0), (6, 0), (9, 1))}
    events = lockstep(nodes, 12)
    decided = [e for evs in events.values() for e in evs]
    assert len(decided) == 3
    assert len({e.value for e in decided}) == 1 and decided[0].value in (0, 1)


def test_stepping_after_termination_is_an_error():
    nodes = {v: ConsensusNode(v, 0) for v in (1, 2, 3, 4)}
    lockstep(nodes, 7)
    with pytest.raises(ProtocolError):
        nodes[1].step(RoundInbox())


@pytest.mark.parametrize("seed", range(6))
def test_equivocator_mixed_inputs(seed):
    result = run_scenario(g.consensus(7, seed, "equivocator"))
    assert result.verdict.passed, result.verdict.failures()
    checks = {c.name for c in result.verdict.checks}
    assert {"validity", "agreement", "termination_relay", "no_conflicting_quorums"} <= checks
