"""Scenario configuration: JSON loading, dotted-key overrides, and
round-tripping back to plain dicts for report echoes."""

from __future__ import annotations

import json
from dataclasses import replace
from typing import Any, Dict

from .costs import profile_from_dict
from .engine import Policy, ScenarioConfig
from .predictors import PredictorConfig, Strategy
from .workload import WorkloadSpec


class ConfigError(ValueError):
    """Invalid or inconsistent scenario configuration."""


def scenario_from_dict(d: Dict[str, Any]) -> ScenarioConfig:
    try:
        wl_d = dict(d.get("workload", {}))
        pred_d = dict(d.get("predictor", {}))
        workload = WorkloadSpec(
            total_requests=int(wl_d.get("total_requests", 500)),
            gap_s=float(wl_d.get("gap_s", 0.2)),
            concurrent=int(wl_d.get("concurrent", 5)),
            concurrent_mode=str(wl_d.get("concurrent_mode", "uniform")),
            levels=int(wl_d.get("levels", 5)),
            urgency_weights=wl_d.get("urgency_weights"),
            prompt_len_range=tuple(wl_d.get("prompt_len_range", (16, 128))),
            output_len_range=tuple(wl_d.get("output_len_range", (1, 500))),
            buckets=int(wl_d.get("buckets", 5)),
            max_output_len=int(wl_d.get("max_output_len", 500)),
            seed=int(d.get("seed", 0)),
        )
        predictor = PredictorConfig(
            latency_s=float(pred_d.get("latency_s", 0.0)),
            batch_size=int(pred_d.get("batch_size", 64)),
            strategy=Strategy(pred_d.get("strategy", "immediate")),
            urgency_error=float(pred_d.get("urgency_error", 0.0)),
            length_error=float(pred_d.get("length_error", 0.0)),
        )
        override = None
        if "custom_profile" in d:
            override = profile_from_dict(
                d.get("profile", "custom"), d["custom_profile"]
            )
        return ScenarioConfig(
            policy=Policy(d.get("policy", "semantic")),
            profile=str(d.get("profile", "a100_qwen7b")),
            profile_override=override,
            batch_size=int(d.get("batch_size", 16)),
            memory_capacity=int(d.get("memory_capacity", 10**9)),
            workload=workload,
            predictor=predictor,
            seed=int(d.get("seed", 0)),
            dependency_rule=bool(d.get("dependency_rule", True)),
            decode_batch_cost=str(d.get("decode_batch_cost", "max")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def scenario_to_dict(cfg: ScenarioConfig) -> Dict[str, Any]:
    wl = cfg.workload
    d: Dict[str, Any] = {
        "policy": cfg.policy.value,
        "profile": cfg.profile,
        "batch_size": cfg.batch_size,
        "memory_capacity": cfg.memory_capacity,
        "seed": cfg.seed,
        "dependency_rule": cfg.dependency_rule,
        "decode_batch_cost": cfg.decode_batch_cost,
        "workload": {
            "total_requests": wl.total_requests,
            "gap_s": wl.gap_s,
            "concurrent": wl.concurrent,
            "concurrent_mode": wl.concurrent_mode,
            "levels": wl.levels,
            "urgency_weights": list(wl.urgency_weights) if wl.urgency_weights else None,
            "prompt_len_range": list(wl.prompt_len_range),
            "output_len_range": list(wl.output_len_range),
            "buckets": wl.buckets,
            "max_output_len": wl.max_output_len,
        },
        "predictor": {
            "latency_s": cfg.predictor.latency_s,
            "batch_size": cfg.predictor.batch_size,
            "strategy": cfg.predictor.strategy.value,
            "urgency_error": cfg.predictor.urgency_error,
            "length_error": cfg.predictor.length_error,
        },
    }
    if cfg.profile_override is not None:
        p = cfg.profile_override
        d["custom_profile"] = {
            "alpha1": p.alpha1,
            "alpha2": p.alpha2,
            "gamma1": p.gamma1,
            "gamma2": p.gamma2,
            "beta_load": p.beta_load,
            "beta_save": p.beta_save,
        }
    return d


def load_scenario(path: str) -> ScenarioConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            d = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from exc
    if not isinstance(d, dict):
        raise ConfigError("scenario file must hold a JSON object")
    return scenario_from_dict(d)


def apply_axis(cfg: ScenarioConfig, axis: str, value: str) -> ScenarioConfig:
    """Return a copy of cfg with one dotted config key replaced.

    Supported axes are top-level scalar keys plus ``workload.*`` and
    ``predictor.*`` scalars, e.g. ``predictor.urgency_error``.
    """
    d = scenario_to_dict(cfg)
    parts = axis.split(".")
    node: Any = d
    for p in parts[:-1]:
        if not isinstance(node, dict) or p not in node:
            raise ConfigError(f"unknown axis {axis!r}")
        node = node[p]
    leaf = parts[-1]
    if not isinstance(node, dict) or leaf not in node:
        raise ConfigError(f"unknown axis {axis!r}")
    old = node[leaf]
    if isinstance(old, bool):
        node[leaf] = value in ("1", "true", "True")
    elif isinstance(old, int):
        node[leaf] = int(value)
    elif isinstance(old, float):
        node[leaf] = float(value)
    elif isinstance(old, str) or old is None:
        node[leaf] = value
    else:
        raise ConfigError(f"axis {axis!r} is not a scalar")
    return scenario_from_dict(d)
