"""Command-line surface: ``simulate``, ``sweep``, and ``audit``.

Exit codes: 0 success, 1 configuration error, 2 unservable requests in
the run.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from .config import ConfigError, apply_axis, load_scenario
from .engine import Trace
from .metrics import emit_csv, report_rows
from .sweeps import run_scenario, sweep


def _write_outputs(out_dir: Path, report, trace: Trace, rows) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(
        json.dumps(report.to_json_obj(), indent=2, sort_keys=True) + "\n"
    )
    (out_dir / "results.csv").write_text(emit_csv(rows))
    with open(out_dir / "trace.jsonl", "w", encoding="utf-8") as fh:
        for ev in trace.events:
            fh.write(json.dumps(ev.to_json_obj(), sort_keys=True) + "\n")
        for rec in trace.records:
            fh.write(
                json.dumps(
                    {
                        "kind": "request_record",
                        "id": rec.id,
                        "arrival": rec.arrival_time,
                        "prediction_ready": rec.prediction_ready,
                        "first_scheduled": rec.first_scheduled,
                        "finish": rec.finish_time,
                        "generated_tokens": rec.generated_tokens,
                        "evictions": rec.evictions,
                        "true_urgency": rec.true_urgency,
                        "predicted_urgency": rec.predicted_urgency,
                        "prompt_len": rec.prompt_len,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def _cmd_simulate(args: argparse.Namespace) -> int:
    cfg = load_scenario(args.config)
    if args.policy:
        cfg = apply_axis(cfg, "policy", args.policy)
    if args.seed is not None:
        cfg = apply_axis(cfg, "seed", str(args.seed))
    if args.profile:
        cfg = apply_axis(cfg, "profile", args.profile)
    report, trace = run_scenario(cfg)
    rows = report_rows(report)
    _write_outputs(Path(args.out), report, trace, rows)
    print(
        f"policy={report.policy} avg_wait={report.avg_wait_s:.4f}s "
        f"norm_wait={report.overall_norm_wait_request_avg:.4f}s/tok "
        f"violations={report.violations} evictions={report.evictions} "
        f"unservable={report.unservable}"
    )
    return 2 if report.unservable else 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = load_scenario(args.config)
    values = [v for v in args.values.split(",") if v]
    reports, rows = sweep(cfg, args.axis, values, seed_per_value=args.seed_per_value)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "results.csv").write_text(emit_csv(rows))
    (out_dir / "report.json").write_text(
        json.dumps([r.to_json_obj() for r in reports], indent=2, sort_keys=True) + "\n"
    )
    print(f"{len(reports)} runs, {len(rows)} rows -> {out_dir / 'results.csv'}")
    return 2 if any(r.unservable for r in reports) else 0


def _cmd_audit(args: argparse.Namespace) -> int:
    from .engine import RequestRecord
    from .metrics import constraint_audit

    trace = Trace()
    with open(args.trace, "r", encoding="utf-8") as fh:
        for line in fh:
            obj = json.loads(line)
            if obj.get("kind") == "request_record":
                trace.records.append(
                    RequestRecord(
                        id=obj["id"],
                        arrival_time=obj["arrival"],
                        prediction_ready=obj.get("prediction_ready"),
                        first_scheduled=obj.get("first_scheduled"),
                        finish_time=obj.get("finish"),
                        generated_tokens=obj["generated_tokens"],
                        evictions=obj.get("evictions", 0),
                        true_urgency=obj["true_urgency"],
                        predicted_urgency=obj.get("predicted_urgency"),
                        prompt_len=obj.get("prompt_len", 1),
                    )
                )
    violations, rate = constraint_audit(trace, ranking=args.ranking)
    print(f"violations={len(violations)} rate={rate:.6f}")
    for i, j in violations[:20]:
        print(f"  finished-first={i} outranked-by={j}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semsched", description="Priority-aware LLM-serving scheduling simulator"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one scenario")
    sim.add_argument("--config", required=True)
    sim.add_argument("--policy", choices=["semantic", "fcfs", "sjf", "hpjf"])
    sim.add_argument("--seed", type=int)
    sim.add_argument("--profile")
    sim.add_argument("--out", required=True)
    sim.set_defaults(func=_cmd_simulate)

    sw = sub.add_parser("sweep", help="run a scenario across an axis")
    sw.add_argument("--config", required=True)
    sw.add_argument("--axis", required=True)
    sw.add_argument("--values", required=True, help="comma-separated values")
    sw.add_argument("--seed-per-value", action="store_true")
    sw.add_argument("--out", required=True)
    sw.set_defaults(func=_cmd_sweep)

    au = sub.add_parser("audit", help="audit a trace.jsonl for ordering violations")
    au.add_argument("--trace", required=True)
    au.add_argument("--ranking", choices=["true", "predicted"], default="true")
    au.set_defaults(func=_cmd_audit)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
