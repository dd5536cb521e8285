"""Run one scenario end to end and package the result as a report."""
from __future__ import annotations

import json
import time
from dataclasses import dataclass
from typing import Optional

from .. import __version__
from .adversary import Adversary
from .engine import Engine, GroundTruth
from .protocols import PROTOCOLS
from .scenario import Scenario
from .verify import Verdict


@dataclass
class RunResult:
    scenario: Scenario
    truth: GroundTruth
    verdict: Verdict
    outputs: dict
    nodes: dict
    wall_time: float

    @property
    def ok(self) -> bool:
        """Pass, with the expectation inverted for negative controls."""
        return self.verdict.passed != self.scenario.expect_fail

    def report(self, wall_time: bool = False) -> dict:
        obj = {"tool": "idonly", "version": __version__,
               "seed": self.scenario.seed,
               "scenario": self.scenario.to_obj(),
               "verdict": self.verdict.to_obj(),
               "outputs": self.outputs,
               "ok": self.ok}
        if wall_time:
            obj["wall_time"] = round(self.wall_time, 6)
        return obj

    def report_json(self, wall_time: bool = False) -> str:
        return json.dumps(self.report(wall_time), indent=2, sort_keys=False) + "\n"


def run_scenario(sc: Scenario, seed: Optional[int] = None, record: Optional[bool] = None) -> RunResult:
    """Deterministic given the scenario and seed."""
    if seed is not None:
        sc.seed = seed
    proto = PROTOCOLS[sc.protocol]
    setup = proto.build(sc)
    truth = GroundTruth(faulty=sc.faulty, inputs={n.id: n.input for n in sc.nodes})
    adversary = Adversary(sc.adversary, sc.adversary_params, sc.seed, setup.shadow_factory,
                          setup.context)
    engine = Engine(setup.nodes, [v for v in sc.faulty if v in sc.genesis()], adversary, truth,
                    delay=setup.delay,
                    record_deliveries=proto.record if record is None else record or proto.record,
                    probe=setup.probe, before_round=setup.before_round)
    started = time.perf_counter()
    engine.run(sc.rounds)
    checks, metrics, outputs = proto.verify(sc, truth, engine.nodes)
    elapsed = time.perf_counter() - started
    metrics = {"rounds": truth.rounds, "messages": truth.messages, **metrics}
    verdict = Verdict(sc.protocol, checks.all(), metrics)
    return RunResult(sc, truth, verdict, outputs, engine.nodes, elapsed)
