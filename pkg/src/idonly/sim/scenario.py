"""Scenario description, JSON schema and load-time validation."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional

import jsonschema

from .adversary import CATALOG

PROTOCOLS = ("rb", "rotor", "consensus", "approx", "parallel", "dynamic", "partition_demo")


class ScenarioError(ValueError):
    """The scenario is malformed or violates a model assumption."""


SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["protocol", "nodes", "rounds"],
    "properties": {
        "protocol": {"enum": list(PROTOCOLS)},
        "description": {"type": "string"},
        "nodes": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id"],
                "properties": {
                    "id": {"type": "integer", "minimum": 0},
                    "faulty": {"type": "boolean"},
                    "input": {},
                    "block": {"enum": ["A", "B"]},
                },
            },
        },
        "adversary": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name"],
            "properties": {
                "name": {"enum": sorted(CATALOG)},
                "params": {"type": "object"},
            },
        },
        "rounds": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "churn": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["round", "action", "id"],
                "properties": {
                    "round": {"type": "integer", "minimum": 1},
                    "action": {"enum": ["join", "leave"]},
                    "id": {"type": "integer", "minimum": 0},
                },
            },
        },
        "delay": {
            "type": "object",
            "additionalProperties": False,
            "required": ["model"],
            "properties": {
                "model": {"enum": ["lockstep", "per_edge"]},
                "cross": {"type": "integer", "minimum": 1},
            },
        },
        "rules": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "rotor_stop": {"enum": ["wrap", "reselect"]},
                "finality": {"enum": ["settled", "window"]},
            },
        },
        "output": {"type": "string"},
        "expect_fail": {"type": "boolean"},
        "invalid_resilience": {"type": "boolean"},
    },
}


_INT = {"type": "integer"}
_ROUND = {"type": "integer", "minimum": 1}
_VALUES = {"type": "array", "minItems": 1}
_SHARE = {"type": "number", "minimum": 0, "maximum": 1}

ADVERSARY_PARAMS = {
    "silent": {},
    "crash_at": {"round": _ROUND},
    "equivocator": {"values": {"type": "array", "minItems": 2}},
    "echo_forger": {"body": {}, "origins": {"type": "array", "items": _INT}},
    "partial_presence": {"fraction": _SHARE},
    "opinion_splitter": {"values": {"type": "array", "minItems": 2}},
    "fake_instance_injector": {"instance": {}, "phase": _ROUND, "sub": {"enum": [2, 3, 5]},
                               "value": {}, "targets": {"type": "array", "items": _INT}},
    "churn_liar": {"round": _ROUND},
    "random": {"intensity": _SHARE, "values": _VALUES},
}

_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)
_PARAM_VALIDATORS = {
    name: jsonschema.Draft202012Validator(
        {"type": "object", "additionalProperties": False, "properties": props})
    for name, props in ADVERSARY_PARAMS.items()}


@dataclass
class NodeSpec:
    id: int
    faulty: bool = False
    input: Any = None
    block: Optional[str] = None


@dataclass
class Scenario:
    protocol: str
    nodes: list
    rounds: int
    adversary: str = "silent"
    adversary_params: dict = field(default_factory=dict)
    seed: int = 0
    churn: list = field(default_factory=list)
    delay_model: str = "lockstep"
    cross_delay: int = 1
    output: Optional[str] = None
    expect_fail: bool = False
    invalid_resilience: bool = False
    description: str = ""
    rules: dict = field(default_factory=dict)

    @property
    def ids(self) -> list:
        return [s.id for s in self.nodes]

    @property
    def faulty(self) -> frozenset:
        return frozenset(s.id for s in self.nodes if s.faulty)

    @property
    def correct(self) -> list:
        return sorted(s.id for s in self.nodes if not s.faulty)

    def spec(self, node_id) -> NodeSpec:
        for s in self.nodes:
            if s.id == node_id:
                return s
        raise KeyError(node_id)

    def joiners(self) -> dict:
        return {c["id"]: c["round"] for c in self.churn if c["action"] == "join"}

    def leavers(self) -> dict:
        return {c["id"]: c["round"] for c in self.churn if c["action"] == "leave"}

    def genesis(self) -> list:
        joining = self.joiners()
        return [i for i in self.ids if i not in joining]

    def to_obj(self) -> dict:
        nodes = []
        for s in self.nodes:
            entry: dict = {"id": s.id}
            if s.faulty:
                entry["faulty"] = True
            if s.input is not None:
                entry["input"] = s.input
            if s.block is not None:
                entry["block"] = s.block
            nodes.append(entry)
        obj: dict = {"protocol": self.protocol, "nodes": nodes,
                     "adversary": {"name": self.adversary, "params": self.adversary_params},
                     "rounds": self.rounds, "seed": self.seed}
        if self.churn:
            obj["churn"] = self.churn
        if self.delay_model != "lockstep":
            obj["delay"] = {"model": self.delay_model, "cross": self.cross_delay}
        if self.expect_fail:
            obj["expect_fail"] = True
        if self.invalid_resilience:
            obj["invalid_resilience"] = True
        if self.description:
            obj["description"] = self.description
        if self.rules:
            obj["rules"] = dict(self.rules)
        return obj


def from_obj(obj: Any) -> Scenario:
    error = jsonschema.exceptions.best_match(_VALIDATOR.iter_errors(obj))
    if error is not None:
        where = "/".join(str(p) for p in error.absolute_path) or "<root>"
        raise ScenarioError(f"schema violation at {where}: {error.message}")
    adv = obj.get("adversary", {"name": "silent"})
    delay = obj.get("delay", {"model": "lockstep"})
    scenario = Scenario(
        protocol=obj["protocol"],
        nodes=[NodeSpec(n["id"], n.get("faulty", False), n.get("input"), n.get("block"))
               for n in obj["nodes"]],
        rounds=obj["rounds"],
        adversary=adv["name"],
        adversary_params=adv.get("params", {}),
        seed=obj.get("seed", 0),
        churn=[dict(c) for c in obj.get("churn", [])],
        delay_model=delay["model"],
        cross_delay=delay.get("cross", 1),
        output=obj.get("output"),
        expect_fail=obj.get("expect_fail", False),
        invalid_resilience=obj.get("invalid_resilience", False),
        description=obj.get("description", ""),
        rules=dict(obj.get("rules", {})),
    )
    validate(scenario)
    return scenario


def load(path) -> Scenario:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON ({exc})") from None
    return from_obj(obj)


def validate(s: Scenario) -> None:
    if s.adversary not in _PARAM_VALIDATORS:
        raise ScenarioError(f"unknown adversary strategy {s.adversary!r}")
    error = jsonschema.exceptions.best_match(_PARAM_VALIDATORS[s.adversary].iter_errors(
        s.adversary_params))
    if error is not None:
        where = "/".join(str(p) for p in error.absolute_path) or "params"
        raise ScenarioError(f"adversary {s.adversary}: {where}: {error.message}")
    ids = s.ids
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        raise ScenarioError(f"duplicate node ids {dupes}")
    if s.protocol == "rb":
        senders = [n.id for n in s.nodes if n.input is not None]
        if len(senders) != 1:
            raise ScenarioError("rb needs exactly one node with an input (the sender)")
    if s.protocol in ("consensus", "rotor", "approx") and any(
            n.input is None for n in s.nodes if not n.faulty):
        raise ScenarioError(f"{s.protocol}: every correct node needs an input")
    if s.protocol == "parallel":
        for n in s.nodes:
            pairs = n.input or []
            if not isinstance(pairs, list) or any(
                    not isinstance(p, list) or len(p) != 2 or p[1] is None for p in pairs):
                raise ScenarioError(f"node {n.id}: parallel input must be a list of [id, value] pairs")
            if len({repr(p[0]) for p in pairs}) != len(pairs):
                raise ScenarioError(f"node {n.id}: duplicate instance id in inputs")
    if s.protocol == "partition_demo":
        if s.delay_model != "per_edge":
            raise ScenarioError("partition_demo needs the per_edge delay model")
        if s.faulty:
            raise ScenarioError("partition_demo has no faulty nodes")
        if any(n.block is None for n in s.nodes):
            raise ScenarioError("partition_demo: every node needs a block")
    elif s.delay_model != "lockstep":
        raise ScenarioError("per-edge delays are only meaningful for partition_demo")
    if "rotor_stop" in s.rules and s.protocol != "rotor":
        raise ScenarioError("rules.rotor_stop applies to the rotor protocol only")
    if "finality" in s.rules and s.protocol != "dynamic":
        raise ScenarioError("rules.finality applies to the dynamic protocol only")
    if s.churn and s.protocol != "dynamic":
        raise ScenarioError("churn is only supported by the dynamic protocol")
    _check_churn(s)
    if s.invalid_resilience or s.protocol == "partition_demo":
        return
    if s.protocol == "dynamic":
        return                      # checked round by round in _check_churn
    n, f = len(s.nodes), len(s.faulty)
    if n <= 3 * f:
        raise ScenarioError(f"n={n} does not exceed 3f={3 * f}; mark invalid_resilience to allow")


def _check_churn(s: Scenario) -> None:
    if not s.churn:
        return
    known = set(s.ids)
    joins = s.joiners()
    leaves = s.leavers()
    for c in s.churn:
        if c["id"] not in known:
            raise ScenarioError(f"churn refers to unknown node {c['id']}")
        if c["round"] > s.rounds:
            raise ScenarioError(f"churn event at round {c['round']} beyond the horizon")
    if len(joins) != sum(1 for c in s.churn if c["action"] == "join") or \
            len(leaves) != sum(1 for c in s.churn if c["action"] == "leave"):
        raise ScenarioError("a node may join at most once and leave at most once")
    if len(set(joins.values())) != len(joins):
        raise ScenarioError("at most one node may join per round")
    for v, r in leaves.items():
        if v in joins and r <= joins[v] + 2:
            raise ScenarioError(f"node {v} leaves before it has finished joining")
    if not s.genesis():
        raise ScenarioError("dynamic scenario needs at least one genesis node")
    if s.invalid_resilience:
        return
    faulty = s.faulty
    for t in range(1, s.rounds + 1):
        present = [v for v in s.ids if joins.get(v, 1) <= t and leaves.get(v, s.rounds + 1) > t]
        f = sum(1 for v in present if v in faulty)
        if len(present) <= 3 * f:
            raise ScenarioError(f"round {t}: n={len(present)} does not exceed 3f={3 * f}")
