"""Deterministic discrete-event simulator.

The run loop serializes the arrival, queue-maintenance, and execution
paths into a single virtual-time event sequence: arrivals pass through
the predictor simulation, prediction-ready requests enter the arrival
buffer, and each device round selects a batch (policy-specific), frees
memory for it, executes it, and advances the clock by the batch
duration.  Preemption happens only at round boundaries.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from .batching import Batch, BatchKind, stage_aware_schedule
from .costs import (
    GpuProfile,
    decode_step_time,
    estimate_remaining_time,
    get_profile,
    prefill_time,
    reload_time,
)
from .heaps import ArrivalBuffer, DispatchQueue, EvictionQueue
from .kvcache import (
    AdmissionFailure,
    DeviceMemory,
    EvictionDecision,
    estimate_kv_size,
    priority_based_eviction,
)
from .predictors import PredictorConfig, Strategy, predictor_pipeline
from .requests import PriorityKey, Request, Stage
from .workload import WorkloadSpec, generate


class Policy(enum.Enum):
    SEMANTIC = "semantic"
    FCFS = "fcfs"
    SJF = "sjf"
    HPJF = "hpjf"


class EventKind(enum.Enum):
    ARRIVAL = "arrival"
    PREDICTION_READY = "prediction_ready"
    ITERATION_END = "iteration_end"
    RUN_END = "run_end"


@dataclass
class Event:
    time: float
    kind: EventKind
    payload: Dict[str, Any] = field(default_factory=dict)

    def to_json_obj(self) -> Dict[str, Any]:
        return {"t": round(self.time, 9), "kind": self.kind.value, **self.payload}


@dataclass
class RequestRecord:
    id: int
    arrival_time: float
    prediction_ready: Optional[float]
    first_scheduled: Optional[float]
    finish_time: Optional[float]
    generated_tokens: int
    evictions: int
    true_urgency: int
    predicted_urgency: Optional[int]
    prompt_len: int


@dataclass
class Trace:
    records: List[RequestRecord] = field(default_factory=list)
    events: List[Event] = field(default_factory=list)
    unservable: List[int] = field(default_factory=list)
    eviction_count: int = 0

    def completed_records(self) -> List[RequestRecord]:
        return [r for r in self.records if r.finish_time is not None]


@dataclass(frozen=True)
class ScenarioConfig:
    policy: Policy = Policy.SEMANTIC
    profile: str = "a100_qwen7b"
    profile_override: Optional[GpuProfile] = None
    batch_size: int = 16
    memory_capacity: int = 10**9
    workload: WorkloadSpec = field(default_factory=WorkloadSpec)
    predictor: PredictorConfig = field(default_factory=PredictorConfig)
    seed: int = 0
    dependency_rule: bool = True
    decode_batch_cost: str = "max"  # "max" parallel steps, "sum" serial device

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.memory_capacity < 1:
            raise ValueError("memory capacity must be >= 1")
        if self.decode_batch_cost not in ("max", "sum"):
            raise ValueError("decode_batch_cost must be 'max' or 'sum'")

    def gpu_profile(self) -> GpuProfile:
        return self.profile_override or get_profile(self.profile)


def _dispatch_key_fn(policy: Policy):
    if policy is Policy.SEMANTIC:
        return lambda r: r.priority_key()
    if policy is Policy.FCFS:
        return lambda r: (r.arrival_time, r.id)
    if policy is Policy.SJF:
        return lambda r: (r.f_t, r.arrival_time, r.id)
    if policy is Policy.HPJF:
        return lambda r: (r.f_e.rank, r.arrival_time, r.id)
    raise ValueError(policy)


def batch_duration(batch: Batch, p: GpuProfile, decode_cost: str = "max") -> float:
    """Virtual time one round takes.

    Prefill-side members run sequentially (reload of host KV charged
    before their compute); decode-side members take one token step each,
    costed as the max (parallel) or sum (serial) of their step times.
    """
    if len(batch) == 0:
        raise ValueError("empty batch has no duration")
    total = 0.0
    step_times: List[float] = []
    for r in batch.members:
        if r.stage is Stage.DECODING:
            # Context includes the token being produced, so per-request
            # step costs sum exactly to decode_total_time.
            step_times.append(
                decode_step_time(r.prompt_len + r.decoded_tokens + 1, 1, p)
            )
        else:
            total += reload_time(r.kv_host_tokens, p)
            total += prefill_time(r.prompt_len - r.prefilled_tokens, p)
    if step_times:
        total += max(step_times) if decode_cost == "max" else sum(step_times)
    return total


class Simulator:
    """Single-run simulation state; ``run(cfg)`` is the usual entry."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.profile = cfg.gpu_profile()
        key_fn = _dispatch_key_fn(cfg.policy)
        self.heap = DispatchQueue(key_fn)
        self.buffer = ArrivalBuffer()
        self.evict_q = EvictionQueue(key_fn)
        self.mem = DeviceMemory(cfg.memory_capacity)
        self.trace = Trace()
        self.clock = 0.0
        self.ongoing: List[Request] = []
        self.requests: List[Request] = []

    # ------------------------------------------------------------------
    def run(self, arrivals: Optional[List[Request]] = None) -> Trace:
        cfg = self.cfg
        rng = random.Random(cfg.seed)
        if arrivals is None:
            arrivals = generate(cfg.workload)
        self.requests = arrivals
        ready = predictor_pipeline(
            arrivals,
            cfg.predictor,
            rng,
            levels=cfg.workload.levels,
            buckets=cfg.workload.buckets,
            max_output_len=cfg.workload.max_output_len,
        )
        for r in arrivals:
            r.f_t = estimate_remaining_time(r, self.profile)
            self.trace.events.append(
                Event(r.arrival_time, EventKind.ARRIVAL, {"ids": [r.id]})
            )
        for t, r in ready:
            self.trace.events.append(
                Event(t, EventKind.PREDICTION_READY, {"ids": [r.id]})
            )
        # Reject requests that can never fit on the device.
        servable: List[Tuple[float, Request]] = []
        for t, r in ready:
            if r.prompt_len + 1 > cfg.memory_capacity:
                self.trace.unservable.append(r.id)
            else:
                servable.append((t, r))
        pending = servable
        next_idx = 0

        while True:
            # Admit every request whose prediction is ready.
            while next_idx < len(pending) and pending[next_idx][0] <= self.clock + 1e-12:
                self.buffer.append(pending[next_idx][1])
                next_idx += 1

            live = len(self.heap) + len(self.buffer) + len(self.ongoing)
            if live == 0:
                if next_idx >= len(pending):
                    break  # all work done
                self.clock = pending[next_idx][0]
                continue

            batch = self._schedule()
            if len(batch) == 0:
                # Memory-blocked: wait for the next external event if any,
                # otherwise this is a hard stall (should not happen).
                if next_idx < len(pending):
                    self.clock = pending[next_idx][0]
                    continue
                break

            self._execute(batch)

        self.trace.events.append(Event(self.clock, EventKind.RUN_END, {}))
        self.trace.events.sort(key=lambda e: (e.time, _EVENT_ORDER[e.kind]))
        for r in self.requests:
            self.trace.records.append(
                RequestRecord(
                    id=r.id,
                    arrival_time=r.arrival_time,
                    prediction_ready=r.prediction_ready_time,
                    first_scheduled=r.first_scheduled_time,
                    finish_time=r.finish_time,
                    generated_tokens=r.decoded_tokens,
                    evictions=r.evictions,
                    true_urgency=r.true_urgency.rank,
                    predicted_urgency=r.f_e.rank if r.f_e else None,
                    prompt_len=r.prompt_len,
                )
            )
        return self.trace

    # ------------------------------------------------------------------
    def _schedule(self) -> Batch:
        cfg = self.cfg
        for r in self.ongoing:
            r.f_t = estimate_remaining_time(r, self.profile)
        if cfg.policy is Policy.SEMANTIC:
            return stage_aware_schedule(self.heap, self.buffer, self.ongoing, cfg.batch_size)
        if cfg.policy is Policy.FCFS:
            return self._fcfs_schedule()
        return self._preemptive_schedule()

    def _fcfs_schedule(self) -> Batch:
        # Non-preemptive: ongoing keep their slots; free slots go to the
        # earliest-arrived queued requests.
        self.buffer.drain_into(self.heap)
        members = list(self.ongoing)
        while len(members) < self.cfg.batch_size and len(self.heap) > 0:
            members.append(self.heap.pop_top())
        kind = (
            BatchKind.PREFILL
            if any(r.stage is not Stage.DECODING for r in members)
            else BatchKind.DECODE
        )
        return Batch(kind, members)

    def _preemptive_schedule(self) -> Batch:
        # SJF / HPJF: plain top-b over the policy key, no stage awareness.
        self.buffer.drain_into(self.heap)
        key = self.heap.key_fn
        candidates: List[Request] = []
        while len(candidates) < self.cfg.batch_size and len(self.heap) > 0:
            candidates.append(self.heap.pop_top())
        pool = sorted(candidates + list(self.ongoing), key=key)
        selected = pool[: self.cfg.batch_size]
        self.heap.push_back(pool[self.cfg.batch_size :])
        kind = (
            BatchKind.PREFILL
            if any(r.stage is not Stage.DECODING for r in selected)
            else BatchKind.DECODE
        )
        return Batch(kind, selected)

    # ------------------------------------------------------------------
    def _execute(self, batch: Batch) -> None:
        cfg = self.cfg
        p = self.profile
        granted: List[Request] = []
        decisions: List[EvictionDecision] = []
        evicted_ids: set[int] = set()
        reserved = 0  # slots already promised to granted members this round

        for r in batch.members:
            if r.id in evicted_ids:
                continue  # a higher-priority member reclaimed its KV
            if r.stage is Stage.DECODING:
                immediate = 1
            else:
                immediate = r.kv_host_tokens + (r.prompt_len - r.prefilled_tokens) + 1
            demand = max(estimate_kv_size(r), immediate)
            if demand + reserved > cfg.memory_capacity:
                demand = immediate
            protected = {x.id for x in granted}
            try:
                new = priority_based_eviction(
                    r,
                    self.evict_q,
                    self.heap,
                    self.mem,
                    p,
                    demand=demand + reserved,
                    protected=protected,
                    dependency_rule=cfg.dependency_rule,
                )
            except AdmissionFailure:
                if r.kv_device_tokens + immediate > cfg.memory_capacity:
                    self._mark_unservable(r)
                elif r.id not in self.heap:
                    self.heap.insert(r)  # blocked by this round's batch; retry later
                continue
            decisions.extend(new)
            evicted_ids.update(d.victim_id for d in new)
            granted.append(r)
            reserved += immediate

        if not granted:
            self.ongoing = []
            self.trace.eviction_count += len(decisions)
            if decisions:
                self.trace.events.append(
                    Event(
                        self.clock,
                        EventKind.ITERATION_END,
                        {
                            "ids": [],
                            "mem_used": self.mem.used,
                            "evictions": [_decision_obj(d) for d in decisions],
                        },
                    )
                )
            return

        live_batch = Batch(batch.kind, granted)
        duration = batch_duration(live_batch, p, cfg.decode_batch_cost)
        end = self.clock + duration
        completed_ids: List[int] = []

        for r in granted:
            if r.first_scheduled_time is None:
                r.first_scheduled_time = self.clock
            if r.stage is Stage.DECODING:
                self._decode_step(r)
            else:
                self._prefill_round(r)
            if r.decoded_tokens >= r.true_output_len:
                self._complete(r, end)
                completed_ids.append(r.id)
            else:
                r.f_t = estimate_remaining_time(r, p)
                self.evict_q.update(r)

        self.clock = end
        self.ongoing = [r for r in granted if not r.completed]
        self.trace.eviction_count += len(decisions)
        self.trace.events.append(
            Event(
                end,
                EventKind.ITERATION_END,
                {
                    "ids": sorted(r.id for r in granted),
                    "kind_detail": live_batch.kind.value,
                    "mem_used": self.mem.used,
                    "completed": completed_ids,
                    "evictions": [_decision_obj(d) for d in decisions],
                },
            )
        )

    def _prefill_round(self, r: Request) -> None:
        """Restore host KV and prefill the remaining prompt; the request
        is ready to decode next round."""
        if r.kv_host_tokens > 0:
            self.mem.allocate(r.kv_host_tokens)
            r.kv_device_tokens += r.kv_host_tokens
            r.kv_host_tokens = 0
        to_prefill = r.prompt_len - r.prefilled_tokens
        if to_prefill > 0:
            self.mem.allocate(to_prefill)
            r.kv_device_tokens += to_prefill
            r.prefilled_tokens = r.prompt_len
        r.transition(Stage.PREFILLING)
        r.transition(Stage.DECODING)

    def _decode_step(self, r: Request) -> None:
        self.mem.allocate(1)
        r.kv_device_tokens += 1
        r.decoded_tokens += 1

    def _mark_unservable(self, r: Request) -> None:
        """Remove a request that cannot fit on the device even after
        evicting every other resident; reported, never completed."""
        if r.id in self.evict_q:
            self.evict_q.delete_by_id(r.id)
        if r.id in self.heap:
            self.heap.delete_by_id(r.id)
        if r.kv_device_tokens:
            self.mem.release(r.kv_device_tokens)
            r.kv_device_tokens = 0
        self.trace.unservable.append(r.id)

    def _complete(self, r: Request, t: float) -> None:
        if r.id in self.evict_q:
            self.evict_q.delete_by_id(r.id)
        self.mem.release(r.kv_device_tokens)
        r.kv_device_tokens = 0
        r.finish_time = t
        r.f_t = 0.0
        r.transition(Stage.COMPLETED)


_EVENT_ORDER = {
    EventKind.ARRIVAL: 0,
    EventKind.PREDICTION_READY: 1,
    EventKind.ITERATION_END: 2,
    EventKind.RUN_END: 3,
}


def _decision_obj(d: EvictionDecision) -> Dict[str, Any]:
    return {
        "victim": d.victim_id,
        "prefill_action": d.prefill_action,
        "decode_saved": d.decode_saved,
        "decode_discarded": d.decode_discarded,
        "freed_slots": d.freed_slots,
        "f_t_before": round(d.f_t_before, 9),
        "f_t_after": round(d.f_t_after, 9),
    }


def run(cfg: ScenarioConfig, arrivals: Optional[List[Request]] = None) -> Trace:
    """Simulate a scenario to completion and return its trace.

    ``arrivals`` replaces the generated workload with preset requests
    (e.g. a replayed dataset); they must be time-ordered.
    """
    return Simulator(cfg).run(arrivals)
