"""Scenario orchestration: registry, repository, cost model, runner, CLI."""

from .cost import CostModel, counters_cost, estimate_comm_overhead, measure_counters, predict_cost
from .registry import DEFAULT_UNIVERSE, AttributeRegistry, Repository
from .scenario import (
    SCHEMA_ID,
    ScenarioError,
    load_scenario,
    render_report,
    report_has_denial,
    run_scenario,
    summarize_report,
    validate_scenario,
)

__all__ = [
    "AttributeRegistry",
    "CostModel",
    "DEFAULT_UNIVERSE",
    "Repository",
    "SCHEMA_ID",
    "ScenarioError",
    "counters_cost",
    "estimate_comm_overhead",
    "load_scenario",
    "measure_counters",
    "predict_cost",
    "render_report",
    "report_has_denial",
    "run_scenario",
    "summarize_report",
    "validate_scenario",
]
