"""Step-function basis for time-varying rates.

The default family is a cyclic partition of unity: H indicator
functions on consecutive intervals of a fixed period,

    f_h(t) = 1{ floor(t / period) mod H == h }    (h = 0..H-1),

so exactly one basis function is active at any time. With period one
day and H = 7 this captures day-of-week effects; the generic default
ties the period to the processing window length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class StepBasis:
    """Cyclic indicator basis of H step functions of a given period."""

    H: int
    period: float

    def __post_init__(self):
        if self.H < 1:
            raise InputError(f"basis size H must be >= 1, got {self.H}")
        if self.period <= 0:
            raise InputError(f"basis period must be positive, got {self.period}")

    def active_index(self, t) -> np.ndarray:
        """Index of the single active basis function at each time."""
        t = np.asarray(t, dtype=np.float64)
        return (np.floor(t / self.period).astype(np.int64)) % self.H

    def evaluate(self, t) -> np.ndarray:
        """One-hot basis vector(s) f(t), shape (..., H)."""
        idx = self.active_index(t)
        out = np.zeros(np.shape(idx) + (self.H,))
        np.put_along_axis(
            out.reshape(-1, self.H), np.reshape(idx, (-1, 1)), 1.0, axis=1
        )
        return out

    def segment_measures(self, t0: float, t1: float) -> np.ndarray:
        """Lebesgue measure of {t in [t0, t1) : f_h(t) = 1} for each h.

        Exact: the interval is cut at every multiple of the period and
        each piece is attributed to its active function. Sums to t1 - t0.
        """
        if t1 < t0:
            raise InputError(f"empty interval: t1={t1} < t0={t0}")
        out = np.zeros(self.H)
        if t1 == t0:
            return out
        j0 = int(np.floor(t0 / self.period))
        j1 = int(np.floor(t1 / self.period))
        if j0 == j1:
            out[j0 % self.H] = t1 - t0
            return out
        # head piece, whole periods, tail piece
        out[j0 % self.H] += (j0 + 1) * self.period - t0
        js = np.arange(j0 + 1, j1)
        if js.size:
            np.add.at(out, js % self.H, self.period)
        out[j1 % self.H] += t1 - j1 * self.period
        return out
