"""Simulated urgency and output-length predictors.

A single error-rate knob e couples the fraction of perturbed requests
and the perturbation magnitude: with probability e a prediction is
displaced by max(1, round(e * range)) units, sign chosen uniformly and
flipped if clamping would cancel the displacement entirely.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from typing import List, Sequence, Tuple

from .requests import LengthBucket, Request, UrgencyLevel
from .workload import bucketize


@dataclass(frozen=True)
class ErrorModel:
    error_rate: float
    span: int  # number of urgency levels, or the maximum output length

    def __post_init__(self) -> None:
        if not 0.0 <= self.error_rate <= 1.0:
            raise ValueError("error_rate must be within [0, 1]")
        if self.span < 1:
            raise ValueError("span must be >= 1")

    @property
    def displacement(self) -> int:
        return max(1, round(self.error_rate * self.span))


class Strategy(enum.Enum):
    IMMEDIATE = "immediate"
    FULL_BATCHING = "full_batching"


@dataclass(frozen=True)
class PredictorConfig:
    latency_s: float = 0.0
    batch_size: int = 64
    strategy: Strategy = Strategy.IMMEDIATE
    urgency_error: float = 0.0
    length_error: float = 0.0

    def __post_init__(self) -> None:
        if self.latency_s < 0:
            raise ValueError("latency must be nonnegative")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")


def _displace(value: int, lo: int, hi: int, d: int, rng: random.Random) -> int:
    sign = 1 if rng.random() < 0.5 else -1
    out = min(hi, max(lo, value + sign * d))
    if out == value:
        out = min(hi, max(lo, value - sign * d))
    return out


def predict_urgency(true_u: UrgencyLevel, em: ErrorModel, rng: random.Random) -> UrgencyLevel:
    if rng.random() >= em.error_rate:
        return true_u
    rank = _displace(true_u.rank, 0, em.span - 1, em.displacement, rng)
    return UrgencyLevel(rank, em.span)


def predict_length_bucket(
    true_len: int,
    em: ErrorModel,
    rng: random.Random,
    buckets: int,
) -> LengthBucket:
    if true_len > em.span:
        raise ValueError("true length exceeds the model's maximum length")
    length = true_len
    if rng.random() < em.error_rate:
        length = _displace(true_len, 0, em.span, em.displacement, rng)
    return bucketize(length, buckets, em.span)


def predictor_pipeline(
    arrivals: Sequence[Request],
    cfg: PredictorConfig,
    rng: random.Random,
    levels: int = 5,
    buckets: int = 5,
    max_output_len: int = 500,
) -> List[Tuple[float, Request]]:
    """Assign predictions and compute each request's ready time.

    Arrivals must be time-ordered.  The predictor is a single serial
    resource: invocations queue behind one another.  Immediate processing
    fires one invocation per concurrent-arrival chunk; full batching
    accumulates until ``batch_size`` requests are waiting (a run-end
    flush covers the residual partial batch).
    """
    urgency_em = ErrorModel(cfg.urgency_error, levels)
    length_em = ErrorModel(cfg.length_error, max_output_len)

    for i in range(1, len(arrivals)):
        if arrivals[i].arrival_time < arrivals[i - 1].arrival_time:
            raise ValueError("arrivals must be time-ordered")

    for r in arrivals:
        r.f_e = predict_urgency(r.true_urgency, urgency_em, rng)
        r.predicted_bucket = predict_length_bucket(
            r.true_output_len, length_em, rng, buckets
        )

    ready: List[Tuple[float, Request]] = []
    server_free = 0.0

    def fire(batch: Sequence[Request], fill_time: float) -> None:
        nonlocal server_free
        start = max(fill_time, server_free)
        done = start + cfg.latency_s
        server_free = done
        for r in batch:
            r.prediction_ready_time = done
            ready.append((done, r))

    if cfg.strategy is Strategy.IMMEDIATE:
        i = 0
        n = len(arrivals)
        while i < n:
            t = arrivals[i].arrival_time
            j = i
            while j < n and arrivals[j].arrival_time == t:
                j += 1
            group = arrivals[i:j]
            for k in range(0, len(group), cfg.batch_size):
                fire(group[k : k + cfg.batch_size], t)
            i = j
    else:
        pending: List[Request] = []
        for r in arrivals:
            pending.append(r)
            if len(pending) >= cfg.batch_size:
                fire(pending, r.arrival_time)
                pending = []
        if pending:
            fire(pending, arrivals[-1].arrival_time)

    ready.sort(key=lambda e: (e[0], e[1].arrival_time, e[1].id))
    return ready
