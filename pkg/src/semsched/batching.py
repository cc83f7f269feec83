"""Per-iteration batch selection with stage awareness.

The selection rule prevents priority inversion between stages: when the
globally highest-priority live request is already decoding, newly popped
candidates that would need prefill work are pushed back rather than
allowed to delay it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import List

from .heaps import ArrivalBuffer, DispatchQueue
from .requests import Request, Stage


class BatchKind(enum.Enum):
    PREFILL = "prefill"
    DECODE = "decode"


@dataclass
class Batch:
    kind: BatchKind
    members: List[Request] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.members)

    def prefill_members(self) -> List[Request]:
        return [r for r in self.members if _needs_prefill_work(r)]

    def decode_members(self) -> List[Request]:
        return [r for r in self.members if not _needs_prefill_work(r)]


def _needs_prefill_work(r: Request) -> bool:
    """True when the request must run a prefill/restore iteration before
    it can decode.  Requests re-queued after eviction count as prefill
    work even when only a reload is required."""
    return r.stage is not Stage.DECODING


def extract_top_b(h: DispatchQueue, u: ArrivalBuffer, b: int) -> List[Request]:
    """Drain the buffer, then pop up to b best candidates."""
    if b < 1:
        raise ValueError("batch size must be >= 1")
    u.drain_into(h)
    out: List[Request] = []
    while len(out) < b and len(h) > 0:
        out.append(h.pop_top())
    return out


def stage_aware_schedule(
    h: DispatchQueue,
    u: ArrivalBuffer,
    ongoing: List[Request],
    b: int,
) -> Batch:
    """Select the next batch, merging candidates with ongoing requests.

    Returns the batch; everything considered but not selected is pushed
    back into the dispatch heap, so no request is lost.
    """
    candidates = extract_top_b(h, u, b)
    pool = candidates + list(ongoing)
    if not pool:
        return Batch(BatchKind.DECODE, [])

    key = h.key_fn
    p_star = min(pool, key=key)

    if _needs_prefill_work(p_star):
        merged = sorted(pool, key=key)
        kind = BatchKind.PREFILL
    else:
        decode_candidates = [r for r in candidates if not _needs_prefill_work(r)]
        prefill_candidates = [r for r in candidates if _needs_prefill_work(r)]
        h.push_back(prefill_candidates)
        merged = sorted(decode_candidates + list(ongoing), key=key)
        kind = BatchKind.DECODE

    selected = merged[:b]
    h.push_back(merged[b:])
    return Batch(kind, selected)
