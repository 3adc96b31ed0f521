"""Piecewise scalar functions on the line, with extended-real values.

A :class:`ScalarFn` is a finite list of smooth branches over closed
intervals; off every branch the value is +inf.  Branches must agree on
overlaps (checked stochastically by the test suite, not at runtime).
This is the function format consumed by epigraph sets, subdifferential
queries and Lipschitz screens.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = ["Branch", "ScalarFn"]

_INF = float("inf")


@dataclass(frozen=True)
class Branch:
    """One smooth piece: x in [lo, hi] -> fn(x).

    fn and d1 must accept numpy arrays.  d1 (the derivative) is optional;
    a central difference stands in when it is absent.
    """

    lo: float
    hi: float
    fn: Callable[[np.ndarray], np.ndarray]
    d1: Callable[[np.ndarray], np.ndarray] | None = None
    label: str = ""

    def __post_init__(self) -> None:
        if not self.lo <= self.hi:
            raise ValueError("branch interval is empty")

    def contains(self, x: np.ndarray, tol: float) -> np.ndarray:
        return (x >= self.lo - tol) & (x <= self.hi + tol)

    def deriv(self, x: np.ndarray) -> np.ndarray:
        if self.d1 is not None:
            return np.asarray(self.d1(x), dtype=float)
        h = 1e-6 * np.maximum(1.0, np.abs(x))
        lo = np.maximum(np.asarray(x) - h, self.lo)
        hi = np.minimum(np.asarray(x) + h, self.hi)
        span = np.where(hi - lo > 0, hi - lo, 1.0)
        return (np.asarray(self.fn(hi), dtype=float) - np.asarray(self.fn(lo), dtype=float)) / span


@dataclass(frozen=True)
class ScalarFn:
    """Extended-real function of one variable given by smooth branches."""

    branches: tuple[Branch, ...]
    name: str = ""

    def __post_init__(self) -> None:
        if not self.branches:
            raise ValueError("need at least one branch")

    @staticmethod
    def from_pieces(pieces: Sequence[tuple[tuple[float, float], Callable, Callable | None]],
                    name: str = "") -> "ScalarFn":
        return ScalarFn(tuple(Branch(lo, hi, fn, d1) for (lo, hi), fn, d1 in pieces), name=name)

    @staticmethod
    def smooth(fn: Callable, d1: Callable | None = None,
               lo: float = -_INF, hi: float = _INF, name: str = "") -> "ScalarFn":
        return ScalarFn((Branch(lo, hi, fn, d1),), name=name)

    @staticmethod
    def zero_on(lo: float, hi: float, name: str = "") -> "ScalarFn":
        """Indicator-style piece: 0 on [lo, hi], +inf elsewhere."""
        return ScalarFn((Branch(lo, hi, lambda x: np.zeros_like(np.asarray(x, dtype=float)),
                                lambda x: np.zeros_like(np.asarray(x, dtype=float))),), name=name)

    # -- evaluation ----------------------------------------------------

    def value_many(self, xs: np.ndarray, tol: float = 0.0) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        out = np.full(xs.shape, _INF)
        todo = np.ones(xs.shape, dtype=bool)
        for br in self.branches:
            m = todo & br.contains(xs, tol)
            if np.any(m):
                xc = np.clip(xs[m], br.lo, br.hi)
                out[m] = np.asarray(br.fn(xc), dtype=float)
                todo[m] = False
        return out

    def value(self, x: float, tol: float = 0.0) -> float:
        return float(self.value_many(np.array([x]), tol)[0])

    def finite_at(self, x: float, tol: float = 0.0) -> bool:
        return math.isfinite(self.value(x, tol))

    # -- domain geometry ----------------------------------------------

    def dom_intervals(self) -> list[tuple[float, float]]:
        ivs = sorted((br.lo, br.hi) for br in self.branches)
        merged: list[tuple[float, float]] = []
        for lo, hi in ivs:
            if merged and lo <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
            else:
                merged.append((lo, hi))
        return merged

    def dom_bounds(self) -> tuple[float, float]:
        ivs = self.dom_intervals()
        return ivs[0][0], ivs[-1][1]
