"""Synthetic request-stream generation and dataset ingestion.

A workload supplies ground truth only (urgency, prompt and output
lengths, arrival times); predictions are layered on afterwards by the
predictor simulation.
"""

from __future__ import annotations

import json
import random
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

from .requests import LengthBucket, Request, UrgencyLevel


@dataclass(frozen=True)
class WorkloadSpec:
    total_requests: int = 500
    gap_s: float = 0.2
    concurrent: int = 5
    concurrent_mode: str = "uniform"  # "uniform" draws 1..concurrent per tick
    levels: int = 5
    urgency_weights: Optional[Sequence[float]] = None
    prompt_len_range: Tuple[int, int] = (16, 128)
    output_len_range: Tuple[int, int] = (1, 500)
    buckets: int = 5
    max_output_len: int = 500
    seed: int = 0

    def __post_init__(self) -> None:
        if self.gap_s <= 0:
            raise ValueError("arrival gap must be positive")
        if self.total_requests < 0:
            raise ValueError("total_requests must be nonnegative")
        if self.concurrent < 1:
            raise ValueError("concurrent must be >= 1")
        if self.concurrent_mode not in ("fixed", "uniform"):
            raise ValueError("concurrent_mode must be 'fixed' or 'uniform'")
        if self.output_len_range[1] > self.max_output_len:
            raise ValueError("output length range exceeds max_output_len")
        if self.prompt_len_range[0] < 1 or self.output_len_range[0] < 1:
            raise ValueError("lengths must be >= 1")


def bucketize(length: int, buckets: int, max_len: int) -> LengthBucket:
    """Map a length to its equal-width bucket over [0, max_len]."""
    if length < 0:
        raise ValueError("length must be nonnegative")
    if length > max_len:
        warnings.warn(
            f"length {length} exceeds max_len {max_len}; clamping to top bucket"
        )
        length = max_len
    index = min(buckets - 1, length * buckets // max_len)
    width = max_len / buckets
    representative = int(round((index + 0.5) * width))
    return LengthBucket(index, representative)


def generate(spec: WorkloadSpec) -> List[Request]:
    """Generate a deterministic, time-ordered request stream."""
    rng = random.Random(spec.seed)
    weights = list(spec.urgency_weights) if spec.urgency_weights else [1.0] * spec.levels
    if len(weights) != spec.levels:
        raise ValueError("urgency_weights must have one entry per level")

    out: List[Request] = []
    tick = 0
    rid = 0
    while len(out) < spec.total_requests:
        if spec.concurrent_mode == "fixed":
            count = spec.concurrent
        else:
            count = rng.randint(1, spec.concurrent)
        count = min(count, spec.total_requests - len(out))
        t = tick * spec.gap_s
        for _ in range(count):
            urgency = rng.choices(range(spec.levels), weights=weights)[0]
            out.append(
                Request(
                    id=rid,
                    arrival_time=t,
                    prompt_len=rng.randint(*spec.prompt_len_range),
                    true_output_len=rng.randint(*spec.output_len_range),
                    true_urgency=UrgencyLevel(urgency, spec.levels),
                )
            )
            rid += 1
        tick += 1
    return out


@dataclass(frozen=True)
class DatasetRecord:
    id: int
    prompt_tokens: int
    urgency: int
    output_tokens: int
    prompt: Optional[str] = None


class DatasetError(ValueError):
    """A dataset line that cannot be mapped to a request."""


def _parse_record(obj: dict, line_no: int, levels: int) -> DatasetRecord:
    try:
        rid = int(obj["id"])
        urgency = int(obj["urgency"])
        output_tokens = int(obj["output_tokens"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"line {line_no}: missing or invalid field: {exc}")
    if "prompt_tokens" in obj:
        prompt_tokens = int(obj["prompt_tokens"])
    elif "prompt" in obj and obj["prompt"]:
        prompt_tokens = len(str(obj["prompt"]).split())
    else:
        raise DatasetError(f"line {line_no}: needs prompt_tokens or prompt")
    if not 0 <= urgency < levels:
        raise DatasetError(f"line {line_no}: urgency {urgency} outside [0, {levels})")
    if prompt_tokens < 1 or output_tokens < 1:
        raise DatasetError(f"line {line_no}: token counts must be >= 1")
    return DatasetRecord(rid, prompt_tokens, urgency, output_tokens, obj.get("prompt"))


def load_dataset(
    path: str,
    spec: WorkloadSpec,
) -> Tuple[List[Request], List[str]]:
    """Load line-delimited JSON records; arrival times come from the
    spec's arrival pattern, content from the file.

    Returns (requests, rejected-line reasons).
    """
    rng = random.Random(spec.seed)
    records: List[DatasetRecord] = []
    errors: List[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                errors.append(f"line {line_no}: malformed JSON: {exc.msg}")
                continue
            try:
                records.append(_parse_record(obj, line_no, spec.levels))
            except DatasetError as exc:
                errors.append(str(exc))

    out: List[Request] = []
    tick = 0
    i = 0
    while i < len(records):
        if spec.concurrent_mode == "fixed":
            count = spec.concurrent
        else:
            count = rng.randint(1, spec.concurrent)
        t = tick * spec.gap_s
        for rec in records[i : i + count]:
            out.append(
                Request(
                    id=rec.id,
                    arrival_time=t,
                    prompt_len=rec.prompt_tokens,
                    true_output_len=rec.output_tokens,
                    true_urgency=UrgencyLevel(rec.urgency, spec.levels),
                )
            )
        i += count
        tick += 1
    return out, errors


def serialize_record(rec: DatasetRecord) -> str:
    obj = {
        "id": rec.id,
        "prompt_tokens": rec.prompt_tokens,
        "urgency": rec.urgency,
        "output_tokens": rec.output_tokens,
    }
    if rec.prompt is not None:
        obj["prompt"] = rec.prompt
    return json.dumps(obj, sort_keys=True)
