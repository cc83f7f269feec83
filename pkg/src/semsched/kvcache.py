"""Device-memory accounting and priority-based eviction.

Memory is counted in token slots (one KV slot per token).  When an
incoming request needs more slots than remain, victims are popped from
the eviction max-heap, their KV is offloaded or discarded according to
the cost model, their remaining-time estimate is refreshed, and they are
re-queued for dispatch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Optional, Set

from .costs import (
    GpuProfile,
    estimate_remaining_time,
    optimal_save_tokens,
    should_cache_prefill,
)
from .heaps import DispatchQueue, EvictionQueue
from .requests import Request, Stage


class AdmissionFailure(RuntimeError):
    """Eviction exhausted every victim and space is still insufficient."""

    def __init__(self, rid: int, needed: int, free: int):
        super().__init__(f"request {rid} needs {needed} slots, only {free} free")
        self.rid = rid
        self.needed = needed
        self.free = free


@dataclass
class DeviceMemory:
    capacity: int
    used: int = 0

    def __post_init__(self) -> None:
        if self.capacity < 0:
            raise ValueError("capacity must be nonnegative")

    @property
    def free(self) -> int:
        return self.capacity - self.used

    def allocate(self, slots: int) -> None:
        if slots > self.free:
            raise AdmissionFailure(-1, slots, self.free)
        self.used += slots

    def release(self, slots: int) -> None:
        if slots > self.used:
            raise ValueError("releasing more slots than in use")
        self.used -= slots


@dataclass(frozen=True)
class EvictionDecision:
    victim_id: int
    prefill_action: str  # "offload" | "discard"
    decode_saved: int
    decode_discarded: int
    freed_slots: int
    f_t_before: float
    f_t_after: float


def estimate_kv_size(r: Request) -> int:
    """Additional device slots this request needs through its predicted
    completion (prompt plus predicted output, minus what is resident)."""
    if r.stage is Stage.COMPLETED:
        raise ValueError("completed request has no KV demand")
    if r.predicted_bucket is None:
        raise ValueError(f"request {r.id} has no length prediction yet")
    need = r.prompt_len + r.predicted_bucket.representative_len - r.kv_device_tokens
    return max(0, need)


def should_recompute(
    r_v: Request,
    p: GpuProfile,
    dependency_rule: bool = True,
) -> EvictionDecision:
    """Resolve a victim's device KV: offload what is cheaper to reload,
    discard what is cheaper to recompute, and update the victim's
    counters and stage accordingly.

    When ``dependency_rule`` is set (the default), discarding the prefill
    KV also drops any saved decode KV, since decode state is meaningless
    without the prefill state beneath it.
    """
    if r_v.kv_device_tokens <= 0:
        raise ValueError(f"victim {r_v.id} has no device-resident KV")
    freed = r_v.kv_device_tokens
    f_t_before = r_v.f_t

    if r_v.prefilled_tokens > 0 and should_cache_prefill(r_v.prefilled_tokens, p):
        prefill_action = "offload"
        prefill_saved = r_v.prefilled_tokens
    else:
        prefill_action = "discard"
        prefill_saved = 0
        r_v.prefilled_tokens = 0

    if r_v.decoded_tokens > 0:
        saved = optimal_save_tokens(r_v.prompt_len, r_v.decoded_tokens, p)
    else:
        saved = 0
    if prefill_action == "discard" and dependency_rule:
        saved = 0
    discarded = r_v.decoded_tokens - saved
    r_v.decoded_tokens = saved

    r_v.kv_device_tokens = 0
    r_v.kv_host_tokens = prefill_saved + saved
    new_stage = (
        Stage.EVICTED_OFFLOADED if r_v.kv_host_tokens > 0 else Stage.EVICTED_DISCARDED
    )
    r_v.transition(new_stage)
    r_v.transition(Stage.WAITING)  # immediately re-queued
    r_v.evictions += 1
    r_v.f_t = estimate_remaining_time(r_v, p)

    return EvictionDecision(
        victim_id=r_v.id,
        prefill_action=prefill_action,
        decode_saved=saved,
        decode_discarded=discarded,
        freed_slots=freed,
        f_t_before=f_t_before,
        f_t_after=r_v.f_t,
    )


def priority_based_eviction(
    r: Request,
    g: EvictionQueue,
    h: DispatchQueue,
    mem: DeviceMemory,
    profile: GpuProfile,
    demand: Optional[int] = None,
    protected: Optional[Set[int]] = None,
    dependency_rule: bool = True,
) -> List[EvictionDecision]:
    """Free device memory for ``r`` by evicting lowest-priority victims.

    ``demand`` defaults to estimate_kv_size(r).  ``protected`` ids (the
    current batch, always including r itself) are never victims.  Raises
    AdmissionFailure when the evictable pool cannot cover the demand; the
    heaps are left consistent (already-applied evictions stand).
    """
    if demand is None:
        demand = estimate_kv_size(r)
    protected = set(protected or ()) | {r.id}
    decisions: List[EvictionDecision] = []
    skipped: List[Request] = []
    try:
        while demand + mem.used > mem.capacity:
            victim = None
            while len(g) > 0:
                cand = g.pop_victim()
                if cand.id in protected:
                    skipped.append(cand)
                else:
                    victim = cand
                    break
            if victim is None:
                raise AdmissionFailure(r.id, demand, mem.free)
            if victim.id in h:
                h.delete_by_id(victim.id)
            mem.release(victim.kv_device_tokens)
            decisions.append(should_recompute(victim, profile, dependency_rule))
            h.insert(victim)
    finally:
        for cand in skipped:
            g.insert(cand)
    return decisions
