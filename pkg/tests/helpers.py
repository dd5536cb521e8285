"""A minimal lockstep driver, independent of the simulator engine."""
from idonly.core import BROADCAST, RoundInbox


def lockstep(nodes: dict, rounds: int, inject=None, step=None, before=None) -> dict:
    """Run ``nodes`` for ``rounds`` rounds and return each node's events.

    ``inject(rnd)`` returns ``{recipient: [(sender, payload), ...]}`` for extra
    messages sent in round ``rnd``; ``step(node, inbox)`` overrides how a node
    is stepped; ``before(rnd)`` runs ahead of every round from the second on.
    """
    outs = {v: n.start() for v, n in nodes.items()}
    events = {v: [] for v in nodes}
    for rnd in range(2, rounds + 1):
        inboxes = {v: RoundInbox() for v in nodes}
        for u, out in outs.items():
            for payload, to in out:
                for w in (nodes if to is BROADCAST else [to]):
                    if w in inboxes:
                        inboxes[w].add(u, payload)
        if inject is not None:
            for w, msgs in inject(rnd - 1).items():
                for s, p in msgs:
                    inboxes[w].add(s, p)
        if before is not None:
            before(rnd)
        outs = {}
        for v, node in nodes.items():
            if getattr(node, "halted", False):
                continue
            out, evs = step(node, inboxes[v]) if step else node.step(inboxes[v])
            outs[v] = out
            events[v].extend(evs)
    return events
