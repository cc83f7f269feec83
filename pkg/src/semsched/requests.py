"""Core request, stage, and priority-ordering types.

Every other module operates on these value types.  A request's dispatch
order is the lexicographic tuple (urgency rank, estimated remaining time,
arrival time, id); the eviction order is its exact reverse.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

DEFAULT_URGENCY_LEVELS = 5


class Stage(enum.Enum):
    WAITING = "waiting"
    PREFILLING = "prefilling"
    DECODING = "decoding"
    EVICTED_OFFLOADED = "evicted_offloaded"
    EVICTED_DISCARDED = "evicted_discarded"
    COMPLETED = "completed"


# Legal stage transitions.  There is no path out of COMPLETED.
_LEGAL_TRANSITIONS = {
    Stage.WAITING: {Stage.PREFILLING},
    Stage.PREFILLING: {
        Stage.DECODING,
        Stage.EVICTED_OFFLOADED,
        Stage.EVICTED_DISCARDED,
    },
    Stage.DECODING: {
        Stage.COMPLETED,
        Stage.EVICTED_OFFLOADED,
        Stage.EVICTED_DISCARDED,
    },
    Stage.EVICTED_OFFLOADED: {Stage.WAITING},
    Stage.EVICTED_DISCARDED: {Stage.WAITING},
    Stage.COMPLETED: set(),
}


class IllegalTransitionError(ValueError):
    """Raised on a stage transition outside the legal graph."""


def check_transition(old: Stage, new: Stage) -> None:
    if new not in _LEGAL_TRANSITIONS[old]:
        raise IllegalTransitionError(f"illegal stage transition {old} -> {new}")


@dataclass(frozen=True, order=True)
class UrgencyLevel:
    """Urgency rank within [0, levels).  Rank 0 is the most urgent."""

    rank: int
    levels: int = field(default=DEFAULT_URGENCY_LEVELS, compare=False)

    def __post_init__(self) -> None:
        if not 0 <= self.rank < self.levels:
            raise ValueError(f"urgency rank {self.rank} outside [0, {self.levels})")


@dataclass(frozen=True)
class LengthBucket:
    """One of B equal-width output-length buckets over [0, max_len]."""

    index: int
    representative_len: int

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValueError("bucket index must be nonnegative")


PriorityKey = tuple  # (urgency rank, remaining seconds, arrival, id)


def obtain_priority(f_e: "UrgencyLevel | int", f_t: float, arrival: float, rid: int) -> PriorityKey:
    """Dispatch key: smaller sorts earlier.

    Urgency dominates, then remaining computation time, then arrival time,
    then id.  The (arrival, id) tail makes the order total so runs are
    reproducible.
    """
    rank = f_e.rank if isinstance(f_e, UrgencyLevel) else int(f_e)
    if f_t < 0:
        raise ValueError("remaining time must be nonnegative")
    return (rank, f_t, arrival, rid)


def eviction_priority(key: PriorityKey) -> PriorityKey:
    """Negate a dispatch key so a min-heap over the result acts as the
    eviction max-heap: its root is the lowest-dispatch-priority request."""
    return tuple(-c for c in key)


@dataclass
class Request:
    """One user prompt moving through the system.

    ``true_*`` fields are workload ground truth; ``f_e``/``predicted_bucket``
    come from the (simulated) predictors and are all the scheduler may see.
    ``f_t`` is the continuously re-estimated remaining computation time.
    """

    id: int
    arrival_time: float
    prompt_len: int
    true_output_len: int
    true_urgency: UrgencyLevel
    f_e: Optional[UrgencyLevel] = None
    predicted_bucket: Optional[LengthBucket] = None
    f_t: float = 0.0
    prefilled_tokens: int = 0
    decoded_tokens: int = 0
    kv_device_tokens: int = 0
    kv_host_tokens: int = 0
    finish_time: Optional[float] = None
    stage: Stage = Stage.WAITING
    prediction_ready_time: Optional[float] = None
    first_scheduled_time: Optional[float] = None
    evictions: int = 0

    def __post_init__(self) -> None:
        if self.prompt_len < 1:
            raise ValueError("prompt_len must be >= 1")
        if self.true_output_len < 1:
            raise ValueError("true_output_len must be >= 1")

    def check_invariants(self) -> None:
        assert self.prefilled_tokens <= self.prompt_len
        assert self.decoded_tokens <= self.true_output_len
        assert (
            self.kv_device_tokens + self.kv_host_tokens
            <= self.prefilled_tokens + self.decoded_tokens
        )
        if self.finish_time is not None:
            assert self.finish_time >= self.arrival_time
        assert self.f_t >= 0

    def transition(self, new: Stage) -> None:
        check_transition(self.stage, new)
        self.stage = new

    def priority_key(self) -> PriorityKey:
        if self.f_e is None:
            raise ValueError(f"request {self.id} has no urgency prediction yet")
        return obtain_priority(self.f_e, self.f_t, self.arrival_time, self.id)

    @property
    def completed(self) -> bool:
        return self.stage is Stage.COMPLETED
