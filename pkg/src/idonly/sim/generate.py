"""Seeded scenario generators used by the acceptance suite and property tests."""
from __future__ import annotations

import random
from typing import Optional

from .scenario import NodeSpec, Scenario, validate

STRATEGIES = ("silent", "crash_at", "equivocator", "echo_forger", "partial_presence",
              "opinion_splitter", "random")


def node_ids(rng: random.Random, n: int) -> list:
    """``n`` unique, deliberately non-consecutive ids."""
    return sorted(rng.sample(range(1, 20 * n + 50), n))


def max_faulty(n: int) -> int:
    return (n - 1) // 3


def strategy_params(rng: random.Random, name: str, horizon: int) -> dict:
    if name == "crash_at":
        return {"round": rng.randint(1, max(1, horizon))}
    if name == "partial_presence":
        return {"fraction": rng.choice([0.25, 0.5, 0.75])}
    if name == "random":
        return {"intensity": rng.choice([0.2, 0.5, 0.8])}
    return {}


def _pick(rng, ids, f, avoid=()):
    pool = [i for i in ids if i not in avoid]
    return set(rng.sample(pool, f))


def rb(n: int, seed: int, adversary: str = "random", byzantine_sender: bool = False,
       f: Optional[int] = None, rounds: int = 8) -> Scenario:
    rng = random.Random(seed)
    f = max_faulty(n) if f is None else f
    ids = node_ids(rng, n)
    sender = rng.choice(ids)
    faulty = _pick(rng, ids, f - 1, avoid=[sender]) | {sender} if byzantine_sender and f \
        else _pick(rng, ids, f, avoid=[sender])
    nodes = [NodeSpec(i, i in faulty, rng.randint(0, 9) if i == sender else None) for i in ids]
    return _finish(Scenario("rb", nodes, rounds, adversary, strategy_params(rng, adversary, rounds),
                            seed=seed), n <= 3 * f)


def rotor(n: int, seed: int, adversary: str = "random", f: Optional[int] = None) -> Scenario:
    rng = random.Random(seed)
    f = max_faulty(n) if f is None else f
    ids = node_ids(rng, n)
    faulty = _pick(rng, ids, f)
    nodes = [NodeSpec(i, i in faulty, rng.randint(0, 1)) for i in ids]
    rounds = n + 6
    return _finish(Scenario("rotor", nodes, rounds, adversary, strategy_params(rng, adversary, rounds),
                            seed=seed), n <= 3 * f)


def consensus(n: int, seed: int, adversary: str = "random", f: Optional[int] = None,
              unanimous: Optional[int] = None) -> Scenario:
    rng = random.Random(seed)
    f = max_faulty(n) if f is None else f
    ids = node_ids(rng, n)
    faulty = _pick(rng, ids, f)
    nodes = [NodeSpec(i, i in faulty, unanimous if unanimous is not None else rng.randint(0, 1))
             for i in ids]
    rounds = 2 + 5 * (2 * f + 4)
    return _finish(Scenario("consensus", nodes, rounds, adversary,
                            strategy_params(rng, adversary, rounds), seed=seed), n <= 3 * f)


def approx(n: int, seed: int, adversary: str = "random", f: Optional[int] = None,
           iterations: int = 3) -> Scenario:
    rng = random.Random(seed)
    f = max_faulty(n) if f is None else f
    ids = node_ids(rng, n)
    faulty = _pick(rng, ids, f)
    nodes = [NodeSpec(i, i in faulty, rng.randint(-50, 50)) for i in ids]
    rounds = iterations + 1
    params = strategy_params(rng, adversary, rounds)
    if adversary in ("equivocator", "random"):
        params["values"] = [-1000, 1000] if adversary == "equivocator" else \
            sorted(rng.sample(range(-1000, 1000), 4))
    return _finish(Scenario("approx", nodes, rounds, adversary, params, seed=seed), n <= 3 * f)


PC_CASES = ("common", "single", "mixed", "inject_r2", "inject_r3", "inject_r5", "inject_phase2")


def parallel(n: int, seed: int, case: str = "mixed", adversary: Optional[str] = None,
             f: Optional[int] = None) -> Scenario:
    rng = random.Random(seed)
    f = max_faulty(n) if f is None else f
    ids = node_ids(rng, n)
    faulty = _pick(rng, ids, f)
    correct = [i for i in ids if i not in faulty]
    inputs: dict = {i: [] for i in ids}
    params: dict = {}
    if case in ("common", "mixed") or case.startswith("inject"):
        for i in ids:
            inputs[i].append([7, 4])
    if case in ("single", "mixed"):
        holder = rng.choice(correct)
        inputs[holder].append([11, rng.randint(0, 3)])
    if case == "mixed":
        for i in rng.sample(correct, rng.randint(1, len(correct))):
            inputs[i].append([13, rng.randint(0, 1)])
    if case == "inject_phase2":
        # a split instance keeps the run going past the first phase
        for k, i in enumerate(correct):
            inputs[i].append([13, k % 2])
    if case.startswith("inject"):
        adversary = "fake_instance_injector"
        phase, sub = {"inject_r2": (1, 2), "inject_r3": (1, 3), "inject_r5": (1, 5),
                      "inject_phase2": (2, rng.choice([2, 3, 5]))}[case]
        params = {"instance": 99, "phase": phase, "sub": sub, "value": rng.randint(0, 3)}
        if rng.random() < 0.5:
            params["targets"] = sorted(rng.sample(correct, rng.randint(1, len(correct))))
    if adversary is None:
        adversary = rng.choice(STRATEGIES)
    if adversary != "fake_instance_injector":
        params = strategy_params(rng, adversary, 40)
    nodes = [NodeSpec(i, i in faulty, inputs[i]) for i in ids]
    rounds = 2 + 5 * (2 * f + 4)
    return _finish(Scenario("parallel", nodes, rounds, adversary, params, seed=seed), n <= 3 * f)


def dynamic(seed: int, rounds: int = 200, n_min: int = 4, n_max: int = 13,
            adversary: Optional[str] = None) -> Scenario:
    """Random churn keeping ``n_min <= n <= n_max`` and ``n > 3f`` at every round."""
    rng = random.Random(seed)
    start_n = rng.randint(n_min, min(n_max, 7))
    pool = node_ids(rng, n_max * 3)
    rng.shuffle(pool)
    genesis, spare = pool[:start_n], pool[start_n:]
    f0 = rng.randint(0, max_faulty(start_n))
    faulty = set(rng.sample(genesis, f0))
    designated = rng.choice([v for v in genesis if v not in faulty])
    present = set(genesis)
    joining: dict = {}            # node -> join round
    churn: list = []
    last_join = -10
    for t in range(10, rounds - 40):
        if rng.random() > 0.08:
            continue
        n = len(present)
        f = len(present & faulty)
        leaving_ok = [v for v in present if v != designated and joining.get(v, 0) + 3 < t
                      and (n - 1 > 3 * (f - (v in faulty)))]
        want_join = n < n_max and (rng.random() < 0.55 or n <= n_min)
        if want_join and spare and t - last_join > 2:
            v = spare.pop()
            bad = rng.random() < 0.3 and n + 1 > 3 * (f + 1)
            if bad:
                faulty.add(v)
            present.add(v)
            joining[v] = t
            last_join = t
            churn.append({"round": t, "action": "join", "id": v})
        elif n > n_min and leaving_ok:
            v = rng.choice(sorted(leaving_ok))
            present.discard(v)
            churn.append({"round": t, "action": "leave", "id": v})
    ids = genesis + [c["id"] for c in churn if c["action"] == "join"]
    nodes = [NodeSpec(v, v in faulty, {"every": 1} if v == designated else None) for v in ids]
    if adversary is None:
        adversary = rng.choice(STRATEGIES + ("churn_liar",))
    params = strategy_params(rng, adversary, rounds)
    if adversary == "churn_liar":
        params = {"round": rng.randint(5, rounds - 50)}
    return _finish(Scenario("dynamic", nodes, rounds, adversary, params, seed=seed, churn=churn), False)


def partition(block_size: int = 4, cross_delay: Optional[int] = None, seed: int = 0) -> Scenario:
    ids = list(range(10, 10 + 3 * 2 * block_size, 3))
    nodes = [NodeSpec(v, False, 1 if k < block_size else 0, "A" if k < block_size else "B")
             for k, v in enumerate(ids)]
    # a unanimous block decides at round 7; anything later is past that
    cross = 10 if cross_delay is None else cross_delay
    return _finish(Scenario("partition_demo", nodes, 2 + 5 * 6, "silent", {}, seed=seed,
                            delay_model="per_edge", cross_delay=cross), False)


def _finish(sc: Scenario, invalid: bool) -> Scenario:
    sc.invalid_resilience = invalid
    validate(sc)
    return sc
