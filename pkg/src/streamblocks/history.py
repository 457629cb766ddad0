"""Per-pair history bookkeeping for the streaming pass.

Poisson families only need cumulative event counts per pair. Hawkes
families need the recent timestamps that still contribute appreciable
exponential-kernel excitation; those are kept in per-pair queues
truncated to a trailing radius R (events older than R before the
current time are dropped, bounding memory by the R-recent event count
instead of the stream length).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .events import EdgeList, EventBatch

COUNTS = "counts"
QUEUES = "queues"


@dataclass
class HistoryStore:
    """Sufficient statistics per directed pair, keyed by (src, dst).

    kind "counts": cumulative event counts (Poisson).
    kind "queues": ascending deques of recent timestamps within R (Hawkes).
    Entries exist for every pair of the edge list from construction, so
    the store's footprint is fixed by |A| and R, never by stream length.
    """

    kind: str
    R: float = np.inf
    counts: dict = field(default_factory=dict)
    queues: dict = field(default_factory=dict)

    @classmethod
    def for_edges(cls, edges: EdgeList, kind: str, R: float = np.inf) -> "HistoryStore":
        if kind not in (COUNTS, QUEUES):
            raise InputError(f"unknown store kind {kind!r}")
        store = cls(kind=kind, R=float(R))
        if kind == COUNTS:
            store.counts = {p: 0 for p in edges.pairs()}
        else:
            store.queues = {p: deque() for p in edges.pairs()}
        return store

    def add_counts(self, src: np.ndarray, dst: np.ndarray) -> None:
        if self.kind != COUNTS:
            raise InputError("add_counts requires a counts store")
        if src.size == 0:
            return
        pairs, n = np.unique(np.stack([src, dst], axis=1), axis=0, return_counts=True)
        for (a, b), c in zip(pairs, n):
            self.counts[(int(a), int(b))] = self.counts.get((int(a), int(b)), 0) + int(c)

    def queue_array(self, pair: tuple) -> np.ndarray:
        q = self.queues.get(pair)
        if not q:
            return np.empty(0)
        return np.asarray(q, dtype=np.float64)

    def state_nbytes(self) -> int:
        """Deterministic size accounting for the memory-bound checks."""
        if self.kind == COUNTS:
            return 16 * len(self.counts)
        return 16 * len(self.queues) + 8 * sum(len(q) for q in self.queues.values())


def trim_history(
    store: HistoryStore, R: float, t_current: float, new_events: EventBatch
) -> HistoryStore:
    """Append new events to their pair queues, then drop stale fronts.

    After the call every queue front f satisfies t_current - f <= R.
    New events must be sorted and not later than t_current. The store is
    updated in place and returned.
    """
    if store.kind != QUEUES:
        raise InputError("trim_history requires a queues store")
    if len(new_events):
        new_events.check_sorted()
        if new_events.t[-1] > t_current:
            raise InputError(
                f"new event at t={new_events.t[-1]:g} is later than "
                f"t_current={t_current:g}"
            )
    queues = store.queues
    for s, d, t in zip(new_events.src, new_events.dst, new_events.t):
        pair = (int(s), int(d))
        q = queues.get(pair)
        if q is None:
            q = queues[pair] = deque()
        q.append(float(t))
    cutoff = t_current - R
    for pair, q in queues.items():
        while q and q[0] < cutoff:
            q.popleft()
    return store
