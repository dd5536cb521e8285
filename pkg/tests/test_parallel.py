import pytest

from idonly.core import (BOTTOM, Echo, Init, Input, NoPreference, NoStrongPreference, Prefer,
                         RoundInbox, StrongPrefer, Tagged)
from idonly.parallel import PairOutput, PcNode, pc_adopt, pc_start, pc_step
from idonly.sim import run_scenario
from idonly.sim import generate as g
from helpers import lockstep

IDS = (4, 10, 15)
ECHOES = [(u, Echo(p)) for u in IDS for p in IDS]


def _to_first_phase(node_id, inputs, senders=IDS):
    state, _ = pc_start(node_id, inputs)
    state, _, _ = pc_step(state, RoundInbox([(u, Init()) for u in senders]))
    return state


def test_first_subround_sends_tagged_inputs():
    state = _to_first_phase(4, [(7, 4)])
    _, out, _ = pc_step(state, RoundInbox())
    assert (Tagged(7, Input(4)), None) in out


def test_no_inputs_no_instance_messages():
    state = _to_first_phase(4, [])
    _, out, _ = pc_step(state, RoundInbox())
    assert not [p for p, _ in out if isinstance(p, Tagged)]


def test_bottom_is_not_an_input():
    with pytest.raises(ValueError):
        PcNode(1, [(7, BOTTOM)])


def test_adopt_input_at_second_subround():
    state = _to_first_phase(4, [])
    state, _, _ = pc_step(state, RoundInbox())                   # subround 1
    new = pc_adopt(state, (10, Tagged(9, Input(1))), 2)
    assert 9 in new.instances and new.instances[9].core.x is BOTTOM
    assert 9 not in state.instances


def test_adopt_strongprefer_at_fifth_subround_never_outputs():
    state = _to_first_phase(4, [])
    for _ in range(4):
        state, _, _ = pc_step(state, RoundInbox(ECHOES))
    new = pc_adopt(state, (10, Tagged(9, StrongPrefer(1))), 5)
    assert 9 in new.instances
    assert new.instances[9].core.x is BOTTOM


def test_adoption_after_first_phase_is_discarded():
    state = _to_first_phase(4, [(7, 0)])
    split = [[], [(4, Tagged(7, Input(0))), (10, Tagged(7, Input(1)))],
             [(u, Tagged(7, NoPreference())) for u in IDS],
             [(u, Tagged(7, NoStrongPreference())) for u in IDS], [], []]
    for extra in split:
        state, _, _ = pc_step(state, RoundInbox(ECHOES + extra))
    assert state.round == 8 and not state.done
    new = pc_adopt(state, (10, Tagged(9, Input(1))), 2)
    assert 9 not in new.instances and new.discarded[-1][1] == 9


def test_wrong_message_type_is_discarded():
    state = _to_first_phase(4, [])
    new = pc_adopt(state, (10, Tagged(9, Prefer(1))), 2)
    assert 9 not in new.instances


def test_common_pair_is_output_in_first_phase():
    nodes = {v: PcNode(v, [(7, 4)]) for v in IDS}
    events = lockstep(nodes, 7)
    for v in IDS:
        assert [e for e in events[v] if isinstance(e, PairOutput)] == [PairOutput(7, 4, 7)]


def test_injected_prefer_never_becomes_output():
    nodes = {v: PcNode(v, [(7, 4)]) for v in IDS}

    def inject(rnd):
        if rnd == 1:
            return {v: [(30, Init())] for v in IDS}
        if rnd == 4:                                  # lands in the third subround
            return {v: [(30, Tagged(9, Prefer(1)))] for v in IDS}
        return {}

    lockstep(nodes, 20, inject)
    for v in IDS:
        assert 9 in nodes[v].instances
        assert 9 not in nodes[v].outputs and nodes[v].outputs == {7: 4}


def test_single_holder_is_all_or_nothing():
    for seed in range(10):
        result = run_scenario(g.parallel(4, seed, "single", "silent"))
        assert result.verdict.passed, result.verdict.failures()
        outs = [set(map(tuple, o["pairs"])) for o in result.outputs.values()]
        assert all(o == outs[0] for o in outs)


@pytest.mark.parametrize("case", g.PC_CASES)
def test_generated_cases_pass(case):
    for seed in range(3):
        result = run_scenario(g.parallel(7, seed, case))
        assert result.verdict.passed, (case, seed, result.verdict.failures())
