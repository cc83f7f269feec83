"""Waiting-time metrics, the completion-order constraint audit, and
report/CSV assembly."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from .engine import RequestRecord, Trace


class IncompleteTraceError(ValueError):
    def __init__(self, unfinished: List[int]):
        super().__init__(f"unfinished requests: {unfinished}")
        self.unfinished = unfinished


class AbsentLevelError(KeyError):
    """Requested urgency level has no requests in the trace."""


def _completed(trace: Trace, require_all: bool = True) -> List[RequestRecord]:
    unfinished = [
        r.id
        for r in trace.records
        if r.finish_time is None and r.id not in trace.unservable
    ]
    if require_all and unfinished:
        raise IncompleteTraceError(unfinished)
    return [r for r in trace.records if r.finish_time is not None]


def average_waiting_time(trace: Trace) -> float:
    recs = _completed(trace)
    if not recs:
        raise IncompleteTraceError([])
    return sum(r.finish_time - r.arrival_time for r in recs) / len(recs)


def normalized_waiting_time(trace: Trace, level: int) -> float:
    """Mean of per-request (wait / generated tokens) at one true-urgency
    level."""
    recs = [r for r in _completed(trace) if r.true_urgency == level]
    if not recs:
        raise AbsentLevelError(level)
    return sum((r.finish_time - r.arrival_time) / r.generated_tokens for r in recs) / len(recs)


def overall_normalized_waiting_time(trace: Trace) -> float:
    """Request-averaged normalized waiting over every completed request."""
    recs = _completed(trace)
    if not recs:
        raise IncompleteTraceError([])
    return sum((r.finish_time - r.arrival_time) / r.generated_tokens for r in recs) / len(recs)


def constraint_audit(
    trace: Trace, ranking: str = "true"
) -> Tuple[List[Tuple[int, int]], float]:
    """Enumerate completion-order violations.

    A pair (i, j) with f_i < f_j violates the ordering rule when i
    neither finished before j arrived nor outranks-or-ties j.  Returns
    the violating pairs and the rate over all comparable pairs.
    """
    if ranking not in ("true", "predicted"):
        raise ValueError("ranking must be 'true' or 'predicted'")
    recs = sorted(_completed(trace, require_all=False), key=lambda r: r.finish_time)

    def rank(r: RequestRecord) -> int:
        return r.true_urgency if ranking == "true" else r.predicted_urgency

    violations: List[Tuple[int, int]] = []
    comparable = 0
    n = len(recs)
    for a in range(n):
        ri = recs[a]
        for bidx in range(a + 1, n):
            rj = recs[bidx]
            if ri.finish_time >= rj.finish_time:
                continue
            comparable += 1
            if ri.finish_time < rj.arrival_time:
                continue
            if rank(ri) <= rank(rj):
                continue
            violations.append((ri.id, rj.id))
    rate = len(violations) / comparable if comparable else 0.0
    return violations, rate


@dataclass
class RunReport:
    policy: str
    profile: str
    seed: int
    per_urgency_norm_wait: Dict[int, float]
    avg_wait_s: float
    overall_norm_wait_request_avg: float
    overall_norm_wait_level_avg: float
    violations: int
    violation_rate: float
    evictions: int
    unservable: int
    config: Dict[str, Any] = field(default_factory=dict)

    def to_json_obj(self) -> Dict[str, Any]:
        return {
            "policy": self.policy,
            "profile": self.profile,
            "seed": self.seed,
            "per_urgency_norm_wait": {
                str(k): self.per_urgency_norm_wait[k]
                for k in sorted(self.per_urgency_norm_wait)
            },
            "avg_wait_s": self.avg_wait_s,
            "overall_norm_wait_request_avg": self.overall_norm_wait_request_avg,
            "overall_norm_wait_level_avg": self.overall_norm_wait_level_avg,
            "violations": self.violations,
            "violation_rate": self.violation_rate,
            "evictions": self.evictions,
            "unservable": self.unservable,
            "config": self.config,
        }


def build_report(
    trace: Trace,
    policy: str,
    profile: str,
    seed: int,
    config: Optional[Dict[str, Any]] = None,
    audit_ranking: str = "true",
) -> RunReport:
    recs = _completed(trace, require_all=False)
    levels = sorted({r.true_urgency for r in recs})
    per_level = {lv: normalized_waiting_time(trace, lv) for lv in levels}
    violations, rate = constraint_audit(trace, audit_ranking)
    return RunReport(
        policy=policy,
        profile=profile,
        seed=seed,
        per_urgency_norm_wait=per_level,
        avg_wait_s=sum(r.finish_time - r.arrival_time for r in recs) / len(recs)
        if recs
        else 0.0,
        overall_norm_wait_request_avg=(
            sum((r.finish_time - r.arrival_time) / r.generated_tokens for r in recs)
            / len(recs)
            if recs
            else 0.0
        ),
        overall_norm_wait_level_avg=(
            sum(per_level.values()) / len(per_level) if per_level else 0.0
        ),
        violations=len(violations),
        violation_rate=rate,
        evictions=trace.eviction_count,
        unservable=len(trace.unservable),
        config=config or {},
    )


CSV_HEADER = [
    "policy",
    "profile",
    "axis",
    "axis_value",
    "urgency",
    "norm_wait_s_per_tok",
    "avg_wait_s",
    "violations",
    "evictions",
    "seed",
]


def report_rows(
    report: RunReport, axis: str = "", axis_value: str = ""
) -> List[Dict[str, Any]]:
    """One CSV row per urgency level present in the run."""
    rows = []
    for level in sorted(report.per_urgency_norm_wait):
        rows.append(
            {
                "policy": report.policy,
                "profile": report.profile,
                "axis": axis,
                "axis_value": axis_value,
                "urgency": level,
                "norm_wait_s_per_tok": repr(report.per_urgency_norm_wait[level]),
                "avg_wait_s": repr(report.avg_wait_s),
                "violations": report.violations,
                "evictions": report.evictions,
                "seed": report.seed,
            }
        )
    return rows


def emit_csv(rows: List[Dict[str, Any]]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_HEADER, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def parse_csv(text: str) -> List[Dict[str, Any]]:
    reader = csv.DictReader(io.StringIO(text))
    out = []
    for row in reader:
        out.append(
            {
                "policy": row["policy"],
                "profile": row["profile"],
                "axis": row["axis"],
                "axis_value": row["axis_value"],
                "urgency": int(row["urgency"]),
                "norm_wait_s_per_tok": float(row["norm_wait_s_per_tok"]),
                "avg_wait_s": float(row["avg_wait_s"]),
                "violations": int(row["violations"]),
                "evictions": int(row["evictions"]),
                "seed": int(row["seed"]),
            }
        )
    return out
