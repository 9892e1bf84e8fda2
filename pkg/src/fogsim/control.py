"""High-level entry points: validate, run, and report on scenarios."""

from __future__ import annotations

from pathlib import Path

from .kernel import Trace
from .report import Report, report_from_trace
from .runtime import Runtime
from .scenario import Scenario, load_scenario, scenario_from_dict


def run_scenario(scenario: Scenario, until: int | None = None,
                 seed: int | None = None) -> tuple[Trace, Report]:
    """Execute a validated scenario and derive its report from the trace."""
    if seed is not None:
        scenario.seed = seed
    runtime = Runtime(scenario)
    trace = runtime.run(until)
    return trace, report_from_trace(trace)


def run_scenario_file(path: str | Path, until: int | None = None,
                      seed: int | None = None) -> tuple[Trace, Report]:
    return run_scenario(load_scenario(path), until=until, seed=seed)


__all__ = ["Scenario", "load_scenario", "scenario_from_dict", "run_scenario",
           "run_scenario_file", "report_from_trace", "Report", "Trace"]
