"""Shared numerical tolerances and schedules.

Every geometric decision in this package is made at an explicit tolerance
carried by a :class:`ToleranceConfig`.  The defaults are deliberately
conservative: membership is decided at 1e-9, directions are compared at
about two degrees, and limit operations sweep a geometric radius schedule
down to ~7.6e-6.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

__all__ = ["ToleranceConfig", "DEFAULT_CONFIG", "stable_seed"]


def _default_p_grid() -> tuple[float, ...]:
    # geometric ladder 2^-24 .. 2^0; downward-closed decisions stay on-grid
    return tuple(2.0 ** (-k) for k in range(24, -1, -1))


def _default_radius_schedule() -> tuple[float, ...]:
    # 0.5 * 2^-k for k = 4..16, largest first
    return tuple(0.5 * 2.0 ** (-k) for k in range(4, 17))


@dataclass(frozen=True)
class ToleranceConfig:
    """Numerical policy for cone and differential computations.

    tol_mem
        membership and deduplication tolerance for points.
    tol_dir
        angular tolerance (radians) for comparing directions.
    p_grid
        trial values of the proximal parameter p, ascending.
    radius_schedule
        ball radii used by limit operations, descending.
    grid_res
        lattice points per axis across a queried ball in brute-force
        oracles (per-dimension minimums are enforced by the oracle).
    seed
        root seed for every random sample drawn under this config.
    """

    tol_mem: float = 1e-9
    tol_dir: float = 0.035
    p_grid: tuple[float, ...] = field(default_factory=_default_p_grid)
    radius_schedule: tuple[float, ...] = field(default_factory=_default_radius_schedule)
    grid_res: int = 400
    seed: int = 0

    def __post_init__(self) -> None:
        if not (self.tol_mem > 0.0):
            raise ValueError("tol_mem must be positive")
        if not (0.0 < self.tol_dir < np.pi / 2):
            raise ValueError("tol_dir must lie in (0, pi/2)")
        ps = np.asarray(self.p_grid, dtype=float)
        if ps.size == 0 or np.any(ps <= 0.0) or np.any(np.diff(ps) <= 0.0):
            raise ValueError("p_grid must be positive and strictly increasing")
        rs = np.asarray(self.radius_schedule, dtype=float)
        if rs.size == 0 or np.any(rs <= 0.0) or np.any(np.diff(rs) >= 0.0):
            raise ValueError("radius_schedule must be positive and strictly decreasing")
        if self.grid_res < 8:
            raise ValueError("grid_res too small")

    def with_(self, **kw) -> "ToleranceConfig":
        return replace(self, **kw)

    @property
    def r0(self) -> float:
        """Largest radius of the schedule (the working locality)."""
        return self.radius_schedule[0]


DEFAULT_CONFIG = ToleranceConfig()


def stable_seed(cfg_seed: int, *parts: object) -> np.random.SeedSequence:
    """Deterministic SeedSequence derived from the config seed and a tag.

    Python's builtin hash is salted per process, so the tag is folded in
    through crc32 of its repr.  Same inputs, same stream, any process.
    """
    crcs = []
    for part in parts:
        if isinstance(part, np.ndarray):
            part = part.tobytes()
        if isinstance(part, bytes):
            crcs.append(zlib.crc32(part))
        else:
            crcs.append(zlib.crc32(repr(part).encode()))
    return np.random.SeedSequence(entropy=cfg_seed, spawn_key=tuple(crcs))


def as_array(x: Sequence[float] | np.ndarray, dim: int | None = None) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"expected a point (1-d array), got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise ValueError(f"expected dimension {dim}, got {v.shape[0]}")
    return v
