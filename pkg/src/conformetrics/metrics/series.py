from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import UsageError

METRICS = ("rmsd", "rg", "sasa", "hbonds")


@dataclass(frozen=True, eq=False)
class MetricSeries:
    """Per-frame metric values in internal units (nm, nm^2 or counts).

    ``scope`` is ``"total"`` or ``"chain <k>"``.
    """

    metric: str
    times: np.ndarray
    values: np.ndarray
    scope: str = "total"

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise UsageError(f"series times {t.shape} and values {v.shape} must be equal-length 1-D")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise UsageError("series times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size
