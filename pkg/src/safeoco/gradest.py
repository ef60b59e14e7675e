"""Forward-difference gradient estimation from d + 1 value queries."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np


class EvaluationError(ArithmeticError):
    """An oracle returned a non-finite value."""


@dataclass(frozen=True)
class GradientEstimate:
    estimate: np.ndarray
    probe_radius: float
    base_point: np.ndarray
    base_value: float
    probe_values: np.ndarray

    @property
    def points(self) -> np.ndarray:
        """The d + 1 queried points, base point first."""
        d = self.base_point.shape[0]
        return np.vstack([self.base_point, self.base_point + self.probe_radius * np.eye(d)])

    @property
    def values(self) -> np.ndarray:
        return np.concatenate([[self.base_value], self.probe_values])


def forward_diff(oracle: Callable[[np.ndarray], float], x, delta: float, dim: int | None = None) -> GradientEstimate:
    """Query ``oracle`` at ``x`` and ``x + delta e_i`` (i = 1..d, in order).

    Exactly d + 1 oracle calls are made; the raw values are returned with the
    estimate so callers can reuse them.
    """
    if not delta > 0:
        raise ValueError(f"probe radius must be positive, got {delta}")
    x = np.array(x, dtype=float)
    d = x.shape[0] if dim is None else dim
    if x.shape != (d,):
        raise ValueError(f"point has shape {x.shape}, expected ({d},)")

    base = float(oracle(x))
    if not math.isfinite(base):
        raise EvaluationError(f"oracle returned {base} at the base point")
    probes = np.empty(d)
    for i in range(d):
        p = x.copy()
        p[i] += delta
        v = float(oracle(p))
        if not math.isfinite(v):
            raise EvaluationError(f"oracle returned {v} at probe {i}")
        probes[i] = v
    return GradientEstimate((probes - base) / delta, delta, x, base, probes)


def prop1_error_bound(L: float, delta: float, dim: int) -> float:
    """Worst-case forward-difference error ``sqrt(d) L delta / 2`` for L-smooth convex f."""
    return 0.5 * math.sqrt(dim) * L * delta
