"""Two blocks that only hear each other late decide differently.

Block A starts with input 1 and block B with input 0.  Messages inside a block
take one round; messages across blocks take ``cross_delay`` rounds.  When the
cross delay exceeds the time a block needs to decide on its own, each block
terminates on its own input before hearing from the other.
"""
from __future__ import annotations

from typing import Optional

from . import generate
from .runner import RunResult, run_scenario
from .scenario import Scenario


def partition_summary(result: RunResult) -> str:
    metrics = result.verdict.metrics
    blocks = metrics["block_outputs"]
    shown = ", ".join(f"block {b} -> {' / '.join(map(str, vals))}" for b, vals in blocks.items())
    if metrics["disagreement"]:
        return f"disagreement: {shown}"
    return f"no disagreement: {shown}"


def run_partition_demo(block_size: int = 4, cross_delay: Optional[int] = None,
                       seed: int = 0, scenario: Optional[Scenario] = None) -> RunResult:
    """Run the partition construction; this exhibits, it asserts nothing."""
    if scenario is None:
        if block_size < 1:
            raise ValueError("block size must be at least 1")
        if cross_delay is not None and cross_delay < 1:
            raise ValueError("cross delay must be at least 1")
        scenario = generate.partition(block_size, cross_delay, seed)
    return run_scenario(scenario)
