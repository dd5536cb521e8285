import pytest

from idonly.broadcast import Accepted, RbNode, rb_init, rb_step
from idonly.core import Echo, Init, Present, ProtocolError, RoundInbox
from helpers import lockstep


def test_sender_broadcasts_body():
    _, out = rb_init(3, 3, 7)
    assert out == [(Init(7), None)]


def test_non_sender_broadcasts_present():
    _, out = rb_init(4, 3)
    assert out == [(Present(), None)]


def test_non_sender_with_body_is_rejected():
    with pytest.raises(ProtocolError):
        rb_init(4, 3, 7)


def test_fault_free_acceptance_in_round_three():
    nodes = {v: RbNode(v, 2, 7 if v == 2 else None) for v in (2, 11, 17, 40)}
    events = lockstep(nodes, 5)
    for v, evs in events.items():
        assert evs == [Accepted(7, 2, 3)], v


def test_accepted_node_stays_quiet():
    state, _ = rb_init(1, 9)
    state, _, _ = rb_step(state, RoundInbox([(9, Init(5)), (1, Present()), (2, Present())]))
    echoes = RoundInbox([(u, Echo(9, 5)) for u in (1, 2, 9)])
    state, out, events = rb_step(state, echoes)
    assert events == [Accepted(5, 9, 3)]
    state, out, events = rb_step(state, echoes)
    assert out == [] and events == []


def test_rb_step_leaves_input_state_untouched():
    state, _ = rb_init(1, 9)
    rb_step(state, RoundInbox([(9, Init(5))]))
    assert state.round == 1 and not state.echoed


def test_partial_delivery_by_faulty_sender_is_all_or_nothing():
    """A faulty sender reaches two of three correct nodes, then helps selectively."""
    correct = (1, 2, 3)
    for helper in range(8):
        nodes = {v: RbNode(v, 4) for v in correct}

        def inject(rnd, helper=helper):
            if rnd == 1:
                return {1: [(4, Init(0))], 2: [(4, Init(0))], 3: [(4, Present())]}
            return {v: [(4, Echo(4, 0))] for i, v in enumerate(correct) if helper >> i & 1}

        events = lockstep(nodes, 8, inject)
        rounds = [evs[0].round for evs in events.values() if evs]
        assert len(rounds) in (0, 3), helper
        if rounds:
            assert max(rounds) - min(rounds) <= 1, helper
