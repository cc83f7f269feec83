"""Sweep orchestration: run one scenario per axis value and collect the
per-level report rows."""

from __future__ import annotations

from typing import Any, Dict, List, Sequence, Tuple

from .config import ConfigError, apply_axis, scenario_to_dict
from .engine import ScenarioConfig, run
from .metrics import RunReport, build_report, report_rows


def run_scenario(cfg: ScenarioConfig) -> Tuple[RunReport, Any]:
    trace = run(cfg)
    report = build_report(
        trace,
        policy=cfg.policy.value,
        profile=cfg.profile,
        seed=cfg.seed,
        config=scenario_to_dict(cfg),
    )
    return report, trace


def sweep(
    base: ScenarioConfig,
    axis: str,
    values: Sequence[Any],
    seed_per_value: bool = False,
) -> Tuple[List[RunReport], List[Dict[str, Any]]]:
    """Run the base scenario once per axis value.

    With ``seed_per_value`` each run uses seed + index; otherwise all
    runs share the base seed so only the axis varies.
    """
    if not values:
        raise ConfigError("sweep needs at least one axis value")
    reports: List[RunReport] = []
    rows: List[Dict[str, Any]] = []
    for i, v in enumerate(values):
        cfg = apply_axis(base, axis, str(v))
        if seed_per_value:
            cfg = apply_axis(cfg, "seed", str(base.seed + i))
        report, _ = run_scenario(cfg)
        reports.append(report)
        rows.extend(report_rows(report, axis=axis, axis_value=str(v)))
    return reports, rows
