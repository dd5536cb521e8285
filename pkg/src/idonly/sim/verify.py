"""Property checks and the verdict they roll up into."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional


@dataclass
class Check:
    name: str
    passed: bool = True
    first_round: Optional[int] = None
    witness: str = ""
    asserted: bool = True
    evaluated: int = 0

    def to_obj(self) -> dict:
        obj = {"name": self.name, "passed": self.passed, "asserted": self.asserted,
               "evaluated": self.evaluated}
        if not self.passed:
            obj["first_round"] = self.first_round
            obj["witness"] = self.witness
        return obj


class Checks:
    """Ordered collection of named checks; the first violation of each is kept."""

    def __init__(self, names, reported=()):
        self._checks = {n: Check(n, asserted=n not in reported) for n in names}

    def ok(self, name: str, n: int = 1) -> None:
        self._checks[name].evaluated += n

    def fail(self, name: str, rnd: Optional[int], witness: str) -> None:
        check = self._checks[name]
        check.evaluated += 1
        if check.passed or (rnd is not None and check.first_round is not None
                            and rnd < check.first_round):
            check.passed = False
            check.first_round = rnd
            check.witness = witness

    def expect(self, name: str, condition: bool, rnd: Optional[int], witness) -> bool:
        if condition:
            self.ok(name)
        else:
            self.fail(name, rnd, witness() if callable(witness) else witness)
        return condition

    def __getitem__(self, name) -> Check:
        return self._checks[name]

    def all(self) -> list:
        return list(self._checks.values())


@dataclass
class Verdict:
    protocol: str
    checks: list
    metrics: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.asserted)

    def failures(self) -> list:
        return [c for c in self.checks if c.asserted and not c.passed]

    def to_obj(self) -> dict:
        return {"protocol": self.protocol, "passed": self.passed,
                "checks": [c.to_obj() for c in self.checks], "metrics": self.metrics}
