"""Lockstep simulator, Byzantine strategies and property verification."""
from .engine import Engine, GroundTruth, ModelViolation
from .runner import RunResult, run_scenario
from .scenario import Scenario, ScenarioError, from_obj, load
from .verify import Check, Verdict
