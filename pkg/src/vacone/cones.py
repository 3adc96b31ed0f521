"""Cone representation and algebra.

Sampled cones are finite unit-ray sets; the empty ray set is the zero cone
{0}.  Fixtures with known closed forms may attach exact polyhedral pieces
(homogeneous halfspace intersections) for tight comparisons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_CONFIG, ToleranceConfig, stable_seed
from .errors import InputError
from . import sets as S_


def _dedup_rays(rays: np.ndarray, tol_dir: float) -> np.ndarray:
    """Greedy angular dedup keeping the lexicographically smallest member."""
    if rays.shape[0] == 0:
        return rays
    order = np.lexsort(np.round(rays, 12).T[::-1])
    rays = rays[order]
    cos_tol = math.cos(tol_dir)
    kept = rays[:1]
    for v in rays[1:]:
        if np.max(kept @ v) < cos_tol:
            kept = np.vstack([kept, v])
    return kept


@dataclass(eq=False)
class Cone:
    """Finite ray sample of a closed cone; rays empty means {0}."""

    dim: int
    rays: np.ndarray
    exact: tuple[S_.Polyhedron, ...] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rays = np.asarray(self.rays, dtype=float).reshape(-1, self.dim)
        if self.rays.shape[0]:
            n = np.linalg.norm(self.rays, axis=1)
            if np.any(np.abs(n - 1.0) > 1e-6):
                raise InputError("cone rays must be unit vectors")

    @property
    def trivial(self) -> bool:
        return self.rays.shape[0] == 0


def make_cone(dim: int, rays, exact=None, cfg: ToleranceConfig = DEFAULT_CONFIG,
              meta: dict | None = None) -> Cone:
    """Normalize, drop near-zero vectors, dedup at tol_dir, build a Cone."""
    rays = np.asarray(rays, dtype=float).reshape(-1, dim)
    if rays.shape[0]:
        n = np.linalg.norm(rays, axis=1)
        keep = n > cfg.tol_mem
        rays = rays[keep] / n[keep][:, None]
        rays = _dedup_rays(rays, cfg.tol_dir)
    return Cone(dim, rays, tuple(exact) if exact else None, meta or {})


@dataclass(eq=False)
class LimitCluster:
    """Per-radius direction batches (radius, unit rows), radii decreasing."""

    batches: tuple[tuple[float, np.ndarray], ...]

    def __post_init__(self):
        r = [b[0] for b in self.batches]
        if any(a <= b for a, b in zip(r, r[1:])):
            raise InputError("cluster radii must be strictly decreasing")


# ---------------------------------------------------------------------------
# direction grids


def unit_sphere_grid(dim: int, cfg: ToleranceConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Deterministic unit-direction grid, dense enough for tol_dir tests.

    2-D: 720 equal angles.  3-D: Fibonacci sphere plus canonical axis and
    diagonal directions.  Higher dims: seeded quasi-uniform sample plus the
    canonical directions (only used for coarse sweeps there).
    """
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        th = np.linspace(0.0, 2.0 * math.pi, 720, endpoint=False)
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    canon = _canonical_dirs(dim)
    if dim == 3:
        n = 5000
        k = np.arange(n)
        phi = math.pi * (3.0 - math.sqrt(5.0))
        z = 1.0 - 2.0 * (k + 0.5) / n
        rho = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        pts = np.stack([rho * np.cos(phi * k), rho * np.sin(phi * k), z], axis=1)
        return np.vstack([pts, canon])
    rng = np.random.default_rng(stable_seed(cfg.seed, "dir-grid", dim))
    pts = rng.standard_normal((8192, dim))
    pts /= np.linalg.norm(pts, axis=1)[:, None]
    return np.vstack([pts, canon])


def _canonical_dirs(dim: int) -> np.ndarray:
    out = []
    eye = np.eye(dim)
    for i in range(dim):
        out.append(eye[i])
        out.append(-eye[i])
        for j in range(i + 1, dim):
            for si in (1.0, -1.0):
                for sj in (1.0, -1.0):
                    out.append((si * eye[i] + sj * eye[j]) / math.sqrt(2.0))
    if dim == 3:
        for sx in (1.0, -1.0):
            for sy in (1.0, -1.0):
                for sz in (1.0, -1.0):
                    out.append(np.array([sx, sy, sz]) / math.sqrt(3.0))
    return np.asarray(out)


# ---------------------------------------------------------------------------
# membership and comparison


def _angle_to_piece(piece: S_.Polyhedron, v: np.ndarray) -> float:
    """Angle from unit v to a homogeneous polyhedral cone, via projection."""
    if piece.A.shape[0] == 0:
        return 0.0
    if float(np.max(piece.A @ v - piece.b)) <= 1e-12:
        return 0.0
    _, P, _ = piece.nearest_many(v[None, :])
    proj = P[0]
    npr = float(np.linalg.norm(proj))
    if npr <= 1e-12:
        return math.pi
    return float(math.acos(np.clip(v @ (proj / npr), -1.0, 1.0)))


def cone_contains(K: Cone, v, cfg: ToleranceConfig = DEFAULT_CONFIG) -> bool:
    """True iff v is ~0 or within tol_dir of a ray or exact piece of K."""
    v = np.asarray(v, dtype=float)
    if v.shape != (K.dim,):
        raise InputError("direction dimension mismatch")
    n = float(np.linalg.norm(v))
    if n <= cfg.tol_mem:
        return True
    vh = v / n
    if K.rays.shape[0] and float(np.max(K.rays @ vh)) >= math.cos(cfg.tol_dir):
        return True
    if K.exact:
        for piece in K.exact:
            if _angle_to_piece(piece, vh) <= cfg.tol_dir:
                return True
    return False


def cone_equal(K1: Cone, K2: Cone, cfg: ToleranceConfig = DEFAULT_CONFIG) -> bool:
    """Two-sided angular Hausdorff comparison at tol_dir."""
    if K1.dim != K2.dim:
        raise InputError("cone dimension mismatch")
    for a, b in ((K1, K2), (K2, K1)):
        for ray in a.rays:
            if not cone_contains(b, ray, cfg):
                return False
        if a.exact:
            for piece in a.exact:
                for ray in _piece_sample(piece, cfg):
                    if not cone_contains(b, ray, cfg):
                        return False
    return True


def _piece_sample(piece: S_.Polyhedron, cfg: ToleranceConfig) -> np.ndarray:
    """Unit directions sampling one homogeneous polyhedral piece."""
    grid = unit_sphere_grid(piece.dim, cfg)
    if piece.A.shape[0] == 0:
        return grid
    inside = np.max(grid @ piece.A.T - piece.b, axis=1) <= 1e-9
    return grid[inside]


# ---------------------------------------------------------------------------
# hull, clustering, slicing


def conic_hull(K: Cone, cfg: ToleranceConfig = DEFAULT_CONFIG) -> Cone:
    """Smallest convex cone containing K's rays, by pairwise combinations.

    Midpoint bisection fills arcs geometrically, so a dozen rounds reach
    angular convergence below tol_dir.
    """
    rays = K.rays.copy()
    if rays.shape[0] <= 1:
        return Cone(K.dim, rays, None, dict(K.meta))
    cos_half = math.cos(cfg.tol_dir / 2)
    for _ in range(12):
        sums = rays[:, None, :] + rays[None, :, :]
        flat = sums.reshape(-1, K.dim)
        n = np.linalg.norm(flat, axis=1)
        # near-antipodal sums have float-noise directions that can wrap past
        # a halfplane boundary; interior chains reach the same rays safely
        good = n > 0.02
        cand = flat[good] / n[good][:, None]
        # grow monotonically: re-deduplicating the kept set would let interior
        # candidates displace boundary rays and erode the hull round by round
        fresh = cand[np.max(cand @ rays.T, axis=1) < cos_half]
        if fresh.shape[0] == 0:
            break
        rays = np.vstack([rays, _dedup_rays(fresh, cfg.tol_dir / 2)])
    return Cone(K.dim, _dedup_rays(rays, cfg.tol_dir), None, dict(K.meta))


_PERSISTENCE = 6


def cluster_limits(batches: LimitCluster, cfg: ToleranceConfig = DEFAULT_CONFIG,
                   dim: int | None = None) -> Cone:
    """Outer-limit rays: directions persisting through the smallest radii.

    A direction counts iff each of the _PERSISTENCE smallest-radius batches
    has a member within tol_dir of it; candidates come from the smallest
    batch so the representative is the best-resolved one.
    """
    bs = batches.batches
    if not bs:
        raise InputError("empty cluster input")
    if dim is None:
        dim = next((b[1].shape[1] for b in bs if b[1].size), 0)
        if dim == 0:
            raise InputError("cannot infer dimension from empty batches")
    tail = bs[-_PERSISTENCE:]
    cand = tail[-1][1]
    if cand.size == 0:
        return Cone(dim, np.zeros((0, dim)))
    cos_tol = math.cos(cfg.tol_dir)
    keep = np.ones(cand.shape[0], dtype=bool)
    for _, dirs in tail[:-1]:
        if dirs.size == 0:
            keep[:] = False
            break
        keep &= np.max(cand @ dirs.T, axis=1) >= cos_tol
    return make_cone(dim, cand[keep], cfg=cfg)


def cone_slice(K: Cone, block, target, cfg: ToleranceConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Vectors v with (v ++ target) in K, reconstructed from the rays.

    block is a python slice selecting target's coordinates inside K's
    ambient space; the complement (in order) is returned.  target 0 gives
    the sub-cone of rays vanishing on the block, as unit rays plus the
    zero vector.
    """
    target = np.atleast_1d(np.asarray(target, dtype=float))
    idx = np.arange(K.dim)
    bidx = idx[block]
    if bidx.size != target.size:
        raise InputError("slice target size mismatch")
    cidx = np.setdiff1d(idx, bidx)
    sin_tol = math.sin(cfg.tol_dir)
    tn = float(np.linalg.norm(target))
    if tn <= cfg.tol_mem:
        out = [np.zeros(cidx.size)]
        for d in K.rays:
            if float(np.linalg.norm(d[bidx])) <= sin_tol:
                comp = d[cidx]
                ncomp = float(np.linalg.norm(comp))
                if ncomp > cfg.tol_mem:
                    out.append(comp / ncomp)
        return _dedup_points(np.asarray(out))
    th = target / tn
    out = []
    for d in K.rays:
        db = d[bidx]
        nb = float(np.linalg.norm(db))
        if nb <= sin_tol:
            continue
        if float(db @ th) / nb < math.cos(cfg.tol_dir):
            continue
        out.append(d[cidx] * (tn / nb))
    if not out:
        return np.zeros((0, cidx.size))
    return _dedup_points(np.asarray(out))


def _dedup_points(P: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    if P.shape[0] <= 1:
        return P
    order = np.lexsort(np.round(P, 9).T[::-1])
    P = P[order]
    kept = [P[0]]
    for v in P[1:]:
        if np.linalg.norm(v - kept[-1]) > tol * (1.0 + np.linalg.norm(v)):
            kept.append(v)
    return np.asarray(kept)
