"""Indexed binary heaps and the unsorted arrival buffer.

The dispatch queue is a min-heap over dispatch keys; the eviction queue
is a max-heap realized as a min-heap over negated keys.  Both keep a
position map from request id to heap slot so arbitrary deletion is
O(log n), which the eviction path requires.

The arrival buffer follows a single-producer/single-consumer contract:
one context may append while another drains; the heaps themselves are
owned exclusively by the scheduler context.
"""

from __future__ import annotations

from typing import Callable, Iterable, List, Optional

from .requests import PriorityKey, Request, eviction_priority


class EmptyQueueError(LookupError):
    """Pop or peek on an empty queue."""


class NotFoundError(KeyError):
    """Keyed deletion of an id that is not in the heap."""


class DuplicateRequestError(ValueError):
    """Insertion of an id already enqueued."""


class IndexedMinHeap:
    """Binary min-heap over (key, request) entries with keyed deletion."""

    def __init__(self) -> None:
        self._keys: List[PriorityKey] = []
        self._items: List[Request] = []
        self._pos: dict[int, int] = {}  # request id -> heap slot

    def __len__(self) -> int:
        return len(self._keys)

    def __contains__(self, rid: int) -> bool:
        return rid in self._pos

    def key_of(self, rid: int) -> PriorityKey:
        return self._keys[self._pos[rid]]

    def insert(self, r: Request, key: PriorityKey) -> None:
        if r.id in self._pos:
            raise DuplicateRequestError(f"request {r.id} already in heap")
        self._keys.append(key)
        self._items.append(r)
        self._pos[r.id] = len(self._keys) - 1
        self._sift_up(len(self._keys) - 1)

    def peek(self) -> Request:
        if not self._keys:
            raise EmptyQueueError("peek on empty heap")
        return self._items[0]

    def pop(self) -> Request:
        if not self._keys:
            raise EmptyQueueError("pop on empty heap")
        return self._remove_at(0)

    def delete(self, rid: int) -> Request:
        if rid not in self._pos:
            raise NotFoundError(rid)
        return self._remove_at(self._pos[rid])

    def update(self, r: Request, key: PriorityKey) -> None:
        """Re-key an existing entry (or insert if absent)."""
        if r.id in self._pos:
            self.delete(r.id)
        self.insert(r, key)

    def items(self) -> List[Request]:
        return list(self._items)

    # internal machinery

    def _remove_at(self, i: int) -> Request:
        last = len(self._keys) - 1
        self._swap(i, last)
        item = self._items.pop()
        self._keys.pop()
        del self._pos[item.id]
        if i < len(self._keys):
            self._sift_down(i)
            self._sift_up(i)
        return item

    def _swap(self, i: int, j: int) -> None:
        if i == j:
            return
        self._keys[i], self._keys[j] = self._keys[j], self._keys[i]
        self._items[i], self._items[j] = self._items[j], self._items[i]
        self._pos[self._items[i].id] = i
        self._pos[self._items[j].id] = j

    def _sift_up(self, i: int) -> None:
        while i > 0:
            parent = (i - 1) // 2
            if self._keys[i] < self._keys[parent]:
                self._swap(i, parent)
                i = parent
            else:
                break

    def _sift_down(self, i: int) -> None:
        n = len(self._keys)
        while True:
            left, right = 2 * i + 1, 2 * i + 2
            smallest = i
            if left < n and self._keys[left] < self._keys[smallest]:
                smallest = left
            if right < n and self._keys[right] < self._keys[smallest]:
                smallest = right
            if smallest == i:
                return
            self._swap(i, smallest)
            i = smallest

    def check_position_map(self) -> None:
        assert len(self._pos) == len(self._items)
        for rid, i in self._pos.items():
            assert self._items[i].id == rid
        for i in range(1, len(self._keys)):
            assert self._keys[(i - 1) // 2] <= self._keys[i]


class DispatchQueue:
    """Scheduling min-heap; smallest dispatch key pops first.

    ``key_fn`` computes a request's dispatch key and defaults to the
    urgency/remaining-time lexicographic key; baseline policies install
    their own ordering here.
    """

    def __init__(self, key_fn: Optional[Callable[[Request], PriorityKey]] = None):
        self._heap = IndexedMinHeap()
        self.key_fn = key_fn or (lambda r: r.priority_key())

    def __len__(self) -> int:
        return len(self._heap)

    def __contains__(self, rid: int) -> bool:
        return rid in self._heap

    def insert(self, r: Request) -> None:
        self._heap.insert(r, self.key_fn(r))

    def pop_top(self) -> Request:
        return self._heap.pop()

    def peek(self) -> Request:
        return self._heap.peek()

    def delete_by_id(self, rid: int) -> Request:
        return self._heap.delete(rid)

    def push_back(self, items: Iterable[Request]) -> None:
        for r in items:
            self.insert(r)

    def items(self) -> List[Request]:
        return self._heap.items()

    def check_invariants(self) -> None:
        self._heap.check_position_map()


class EvictionQueue:
    """Max-heap over eviction keys; the root is the device-resident
    request the dispatch order ranks last."""

    def __init__(self, key_fn: Optional[Callable[[Request], PriorityKey]] = None):
        self._heap = IndexedMinHeap()
        self.key_fn = key_fn or (lambda r: r.priority_key())

    def __len__(self) -> int:
        return len(self._heap)

    def __contains__(self, rid: int) -> bool:
        return rid in self._heap

    def insert(self, r: Request) -> None:
        self._heap.insert(r, eviction_priority(self.key_fn(r)))

    def update(self, r: Request) -> None:
        self._heap.update(r, eviction_priority(self.key_fn(r)))

    def pop_victim(self) -> Request:
        return self._heap.pop()

    def peek_victim(self) -> Request:
        return self._heap.peek()

    def delete_by_id(self, rid: int) -> Request:
        return self._heap.delete(rid)

    def items(self) -> List[Request]:
        return self._heap.items()

    def check_invariants(self) -> None:
        self._heap.check_position_map()


class ArrivalBuffer:
    """Append-order buffer of predicted-but-unqueued requests (SPSC)."""

    def __init__(self) -> None:
        self._items: List[Request] = []
        self._ids: set[int] = set()

    def __len__(self) -> int:
        return len(self._items)

    def items(self) -> List[Request]:
        return list(self._items)

    def append(self, r: Request) -> None:
        if r.id in self._ids:
            raise DuplicateRequestError(f"request {r.id} already buffered")
        self._items.append(r)
        self._ids.add(r.id)

    def drain_into(self, h: DispatchQueue) -> int:
        """Move every buffered request into the dispatch heap."""
        moved = 0
        while self._items:
            r = self._items.pop(0)
            self._ids.discard(r.id)
            h.insert(r)
            moved += 1
        return moved


def drain_buffer(b: ArrivalBuffer, h: DispatchQueue) -> int:
    return b.drain_into(h)
