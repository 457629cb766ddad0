"""Event streams, edge lists, and time-window partitioning.

Events are directed timestamped interactions (src, dst, t) carried in
columnar numpy arrays. The edge list fixes the set A of directed node
pairs that carry a point process; events on pairs outside A are invalid.
A window configuration splits the horizon [0, T] into N = ceil(T/dT)
half-open windows [(n-1)dT, n*dT), the last one closed at T.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, NamedTuple

import numpy as np
import scipy.sparse as sp

from .errors import InputError


class Event(NamedTuple):
    src: int
    dst: int
    t: float


@dataclass(frozen=True)
class EventBatch:
    """Columnar slice of an event stream, sorted nondecreasing in t."""

    src: np.ndarray
    dst: np.ndarray
    t: np.ndarray

    @classmethod
    def from_arrays(cls, src, dst, t) -> "EventBatch":
        src = np.ascontiguousarray(src, dtype=np.int64)
        dst = np.ascontiguousarray(dst, dtype=np.int64)
        t = np.ascontiguousarray(t, dtype=np.float64)
        if not (src.shape == dst.shape == t.shape) or src.ndim != 1:
            raise InputError("event columns must be 1-d arrays of equal length")
        return cls(src, dst, t)

    @classmethod
    def from_events(cls, events: Iterable[tuple]) -> "EventBatch":
        rows = list(events)
        if not rows:
            return cls.empty()
        src, dst, t = zip(*rows)
        return cls.from_arrays(src, dst, t)

    @classmethod
    def empty(cls) -> "EventBatch":
        return cls(
            np.empty(0, dtype=np.int64),
            np.empty(0, dtype=np.int64),
            np.empty(0, dtype=np.float64),
        )

    @classmethod
    def concat(cls, batches: Iterable["EventBatch"]) -> "EventBatch":
        batches = list(batches)
        if not batches:
            return cls.empty()
        return cls(
            np.concatenate([b.src for b in batches]),
            np.concatenate([b.dst for b in batches]),
            np.concatenate([b.t for b in batches]),
        )

    def __len__(self) -> int:
        return self.t.shape[0]

    def __iter__(self) -> Iterator[Event]:
        for s, d, ts in zip(self.src, self.dst, self.t):
            yield Event(int(s), int(d), float(ts))

    def __getitem__(self, idx) -> "EventBatch":
        if isinstance(idx, slice):
            return EventBatch(self.src[idx], self.dst[idx], self.t[idx])
        raise TypeError("EventBatch supports slice indexing only")

    def sorted_by_time(self) -> "EventBatch":
        order = np.argsort(self.t, kind="stable")
        return EventBatch(self.src[order], self.dst[order], self.t[order])

    def check_sorted(self) -> None:
        """Reject unsorted streams, reporting the first inversion."""
        d = np.diff(self.t)
        bad = np.nonzero(d < 0)[0]
        if bad.size:
            i = int(bad[0]) + 1
            raise InputError(
                f"event stream not sorted: event {i} has t={self.t[i]:g} "
                f"after t={self.t[i - 1]:g}"
            )


@dataclass(frozen=True)
class EdgeList:
    """The set A of directed (src, dst) pairs, stored sorted by (src, dst).

    m is the node count; all ids live in [0, m). Lookup structures
    (pair codes, adjacency matrices, per-node incidence) are built
    lazily and cached; the pair arrays themselves are never mutated.
    """

    src: np.ndarray
    dst: np.ndarray
    m: int

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple], m: int | None = None) -> "EdgeList":
        arr = np.asarray(sorted(set((int(a), int(b)) for a, b in pairs)), dtype=np.int64)
        if arr.size == 0:
            raise InputError("edge list must contain at least one pair")
        src, dst = arr[:, 0], arr[:, 1]
        if m is None:
            m = int(max(src.max(), dst.max())) + 1
        return cls._build(src, dst, int(m))

    @classmethod
    def from_arrays(cls, src, dst, m: int | None = None) -> "EdgeList":
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        if m is None:
            if src.size == 0:
                raise InputError("edge list must contain at least one pair")
            m = int(max(src.max(), dst.max())) + 1
        m = int(m)
        codes = src * m + dst
        uniq = np.unique(codes)
        return cls._build(uniq // m, uniq % m, m)

    @classmethod
    def _build(cls, src, dst, m) -> "EdgeList":
        if src.size == 0:
            raise InputError("edge list must contain at least one pair")
        if src.min() < 0 or dst.min() < 0 or src.max() >= m or dst.max() >= m:
            raise InputError(f"edge list contains node ids outside [0, {m})")
        if np.any(src == dst):
            i = int(np.nonzero(src == dst)[0][0])
            raise InputError(f"self-pair ({src[i]}, {src[i]}) not allowed")
        return cls(src, dst, m)

    @property
    def n_pairs(self) -> int:
        return self.src.shape[0]

    @cached_property
    def codes(self) -> np.ndarray:
        # sorted because (src, dst) rows are lex-sorted and dst < m
        return self.src * self.m + self.dst

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        data = np.ones(self.n_pairs, dtype=np.float64)
        return sp.csr_matrix((data, (self.src, self.dst)), shape=(self.m, self.m))

    @cached_property
    def adjacency_t(self) -> sp.csr_matrix:
        return self.adjacency.T.tocsr()

    @cached_property
    def _out_indptr(self) -> np.ndarray:
        return np.searchsorted(self.src, np.arange(self.m + 1))

    @cached_property
    def _in_order(self) -> np.ndarray:
        return np.argsort(self.dst, kind="stable")

    @cached_property
    def _in_indptr(self) -> np.ndarray:
        return np.searchsorted(self.dst[self._in_order], np.arange(self.m + 1))

    def out_pair_indices(self, i: int) -> np.ndarray:
        """Positions (into the pair arrays) of pairs with src == i."""
        a, b = self._out_indptr[i], self._out_indptr[i + 1]
        return np.arange(a, b)

    def in_pair_indices(self, i: int) -> np.ndarray:
        """Positions of pairs with dst == i."""
        a, b = self._in_indptr[i], self._in_indptr[i + 1]
        return self._in_order[a:b]

    def contains(self, src, dst) -> np.ndarray:
        """Vectorized membership test for (src, dst) pairs."""
        q = np.asarray(src, dtype=np.int64) * self.m + np.asarray(dst, dtype=np.int64)
        pos = np.searchsorted(self.codes, q)
        pos = np.clip(pos, 0, self.n_pairs - 1)
        return self.codes[pos] == q

    def pair_positions(self, src, dst) -> np.ndarray:
        """Positions of (src, dst) pairs in the pair arrays; pairs must be in A."""
        q = np.asarray(src, dtype=np.int64) * self.m + np.asarray(dst, dtype=np.int64)
        pos = np.searchsorted(self.codes, q)
        if pos.size:
            ok = (pos < self.n_pairs) & (self.codes[np.clip(pos, 0, self.n_pairs - 1)] == q)
            if not np.all(ok):
                i = int(np.nonzero(~ok)[0][0])
                raise InputError(
                    f"event on pair ({int(np.asarray(src).flat[i])}, "
                    f"{int(np.asarray(dst).flat[i])}) which is not in the edge list"
                )
        return pos

    def pairs(self) -> Iterator[tuple]:
        for a, b in zip(self.src, self.dst):
            yield (int(a), int(b))


@dataclass(frozen=True)
class WindowConfig:
    """Partition of [0, T] into N = ceil(T/dT) windows of length dT."""

    dT: float
    T: float
    N: int = field(init=False)

    def __post_init__(self):
        if self.dT <= 0:
            raise InputError(f"window length dT must be positive, got {self.dT}")
        if self.T < 0:
            raise InputError(f"horizon T must be nonnegative, got {self.T}")
        r = self.T / self.dT
        n = int(round(r)) if abs(r - round(r)) < 1e-9 else int(math.ceil(r))
        object.__setattr__(self, "N", max(n, 1) if self.T > 0 else max(n, 0))

    def bounds(self, n: int) -> tuple:
        """Time bounds (t0, t1) of window n, 1-based; t1 capped at T."""
        if not 1 <= n <= self.N:
            raise InputError(f"window index {n} outside 1..{self.N}")
        return ((n - 1) * self.dT, min(n * self.dT, self.T))


def partition_windows(events: EventBatch, cfg: WindowConfig):
    """Split a sorted stream into (window-index, slice) pairs, 1-based.

    Window n holds events with (n-1)*dT <= t < n*dT; the final window
    also takes t == T. Empty windows are emitted. Unsorted input or
    events outside [0, T] are rejected.
    """
    events.check_sorted()
    t = events.t
    if len(events):
        if t[0] < 0:
            raise InputError(f"event 0 has negative timestamp t={t[0]:g}")
        if t[-1] > cfg.T:
            i = int(np.searchsorted(t, cfg.T, side="right"))
            raise InputError(f"event {i} has t={t[i]:g} beyond horizon T={cfg.T:g}")
    if cfg.N == 0:
        return
    edges = np.arange(1, cfg.N + 1, dtype=np.float64) * cfg.dT
    cuts = np.searchsorted(t, edges, side="left")
    cuts[-1] = len(events)  # last window closed at T
    start = 0
    for n in range(1, cfg.N + 1):
        end = int(cuts[n - 1])
        yield n, events[start:end]
        start = end
