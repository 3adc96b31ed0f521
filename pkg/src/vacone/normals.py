"""Normal cones, classical and with respect to a convex body.

The central object is the query (x̄, Ω, C): prox membership sweeps the
defining inequality over sampled points of Ω∩C with the feasibility clause
on C, and the limiting cone is an outer limit realized by two engines,
one sweeping prox cones at inner sample points, one collecting projection
residual directions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import ToleranceConfig, stable_seed
from .errors import InputError
from . import sets as S_
from .cones import Cone, LimitCluster, cluster_limits, make_cone, unit_sphere_grid

_PROX_SHELL_COUNT = {1: 64, 2: 256, 3: 512, 4: 640}
_P_SHELL_COUNT = {1: 48, 2: 128, 3: 192, 4: 256}
_ENGINE_B_COUNT = {1: 64, 2: 700, 3: 1000, 4: 1400}
_ENGINE_A_POINTS = {1: 4, 2: 6, 3: 6, 4: 4}


@dataclass(eq=False)
class NormalQuery:
    """Base point, ambient set, and optional convex body (None = classical)."""

    xbar: np.ndarray
    omega: S_.SetDesc
    body: S_.SetDesc | None
    cfg: ToleranceConfig

    def __post_init__(self):
        self.xbar = np.asarray(self.xbar, dtype=float)
        if self.xbar.ndim != 1 or self.xbar.shape[0] != self.omega.dim:
            raise InputError("base point dimension mismatch")
        if self.body is not None and self.body.dim != self.omega.dim:
            raise InputError("body dimension mismatch")
        self._banks: dict[str, _SampleBank] = {}

    def bank(self, profile: str = "full") -> "_SampleBank":
        if profile not in self._banks:
            self._banks[profile] = _SampleBank(self, profile)
        return self._banks[profile]

    def validate(self):
        if not S_.membership(self.xbar, self.omega, self.cfg):
            raise InputError("base point not in the ambient set")
        if self.body is not None and not S_.membership(self.xbar, self.body, self.cfg):
            raise InputError("base point not in the body")

    @property
    def target(self) -> S_.SetDesc:
        if self.body is None:
            return self.omega
        return S_.intersect(self.omega, self.body)

    def tag(self) -> str:
        b = "" if self.body is None else self.body.key()
        return f"{self.omega.key()}|{b}"


@dataclass
class ProxDetail:
    verdict: bool
    projection_form: bool
    accepted_p: float | None
    warnings: list[str] = field(default_factory=list)


# ---------------------------------------------------------------------------
# sample bank: exact on-set increments shared by all directions


class _SampleBank:
    """Increments x - x̄ over Ω∩C shells, plus shells tied to small p.

    The inequality ⟨x*, u⟩ ≤ ‖u‖²/(2p) binds at scale ‖u‖ ~ p; shells far
    above that scale accept everything, so every p below the schedule's
    finest radius gets its own shells.
    """

    def __init__(self, q: NormalQuery, profile: str = "full"):
        cfg = q.cfg
        dim = q.xbar.shape[0]
        light = profile == "light"
        count = _PROX_SHELL_COUNT.get(dim, 640) // (2 if light else 1)
        radii = cfg.radius_schedule
        target = q.target
        self.warnings: list[str] = []
        if isinstance(target, S_.GenericIntersection):
            self.warnings.append("iterative intersection feet, membership may drift")
        parts = []
        for i, r in enumerate(radii):
            X = S_.sample_near(target, q.xbar, r, count, cfg, tag=f"prox-base-{i}-{q.tag()}")
            if X.shape[0] < count // 2:
                self.warnings.append(f"sampling shortfall at radius {r:g}")
            parts.append(X - q.xbar[None, :])
        self.base = np.vstack(parts)
        self.base_n2 = np.sum(self.base ** 2, axis=1)
        r_min = cfg.radius_schedule[-1]
        pcount = _P_SHELL_COUNT.get(dim, 256) // (2 if light else 1)
        shell_mults = (2.0, 8.0)
        self.per_p: dict[float, tuple[np.ndarray, np.ndarray]] = {}
        for p in cfg.p_grid:
            if 4.0 * p >= r_min:
                continue
            rows = []
            for j, m in enumerate(shell_mults):
                X = S_.sample_near(target, q.xbar, m * p, pcount, cfg,
                                   tag=f"prox-p-{p:.3e}-{j}-{q.tag()}")
                rows.append(X - q.xbar[None, :])
            U = np.vstack(rows)
            self.per_p[p] = (U, np.sum(U ** 2, axis=1))

    def terms(self, p: float):
        extra = self.per_p.get(p)
        if extra is None:
            return self.base, self.base_n2
        return np.vstack([self.base, extra[0]]), np.concatenate([self.base_n2, extra[1]])


def _feasible_many(body: S_.SetDesc | None, pts: np.ndarray, xbar: np.ndarray,
                   cfg: ToleranceConfig) -> np.ndarray:
    """x̄ + p·x* in C at tolerance relative to the step length.

    An absolute tolerance would let any direction graze out of C once
    p‖x*‖ shrinks below it, making the feasibility clause vacuous.
    """
    if body is None:
        return np.ones(pts.shape[0], dtype=bool)
    D, _, _ = body.nearest_many(pts)
    step = np.linalg.norm(pts - xbar[None, :], axis=1)
    return D <= cfg.tol_mem * step + 1e-15


def _ineq_holds(dirs: np.ndarray, U: np.ndarray, n2: np.ndarray, p: float,
                cfg: ToleranceConfig) -> np.ndarray:
    """Vectorized Prox inequality over unit dirs; relative slack only.

    An absolute floor would swallow the violation c²p/2 of a direction c
    radians outside the cone once p is small.
    """
    lhs = dirs @ U.T
    rhs = n2 / (2.0 * p) + cfg.tol_mem * np.sqrt(n2) + 1e-12
    return np.all(lhs <= rhs[None, :], axis=1)


def _prox_accept_bulk(dirs: np.ndarray, q: NormalQuery, bank: _SampleBank,
                      free_delta: bool = False) -> np.ndarray:
    """Accept mask over unit directions, ∃p with feasibility and inequality."""
    cfg = q.cfg
    accept = np.zeros(dirs.shape[0], dtype=bool)
    if free_delta:
        delta_max = max(1.0 / (2.0 * cfg.p_grid[0]), 100.0)
    for p in cfg.p_grid:
        todo = ~accept
        if not np.any(todo):
            break
        feas = _feasible_many(q.body, q.xbar[None, :] + p * dirs[todo], q.xbar, cfg)
        if not np.any(feas):
            continue
        U, n2 = bank.terms(p)
        sub = dirs[todo][feas]
        if free_delta:
            lhs = sub @ U.T
            rhs = delta_max * n2 + cfg.tol_mem * np.sqrt(n2) + 1e-12
            ok = np.all(lhs <= rhs[None, :], axis=1)
        else:
            ok = _ineq_holds(sub, U, n2, p, cfg)
        idx = np.flatnonzero(todo)[feas]
        accept[idx[ok]] = True
    return accept


# ---------------------------------------------------------------------------
# membership and prox cone


def prox_normal_member(x_star, q: NormalQuery, free_delta: bool = False) -> bool:
    return prox_normal_member_detail(x_star, q, free_delta).verdict


def prox_normal_member_detail(x_star, q: NormalQuery,
                              free_delta: bool = False) -> ProxDetail:
    """Inequality-form verdict plus the projection-form cross-check.

    The candidate keeps its own magnitude: the p in the feasibility clause
    multiplies x* directly, so the grid is rescaled rather than the vector.
    """
    cfg = q.cfg
    x_star = np.asarray(x_star, dtype=float)
    nx = float(np.linalg.norm(x_star))
    if nx <= cfg.tol_mem:
        return ProxDetail(True, True, None)
    d = (x_star / nx)[None, :]
    bank = q.bank()
    accepted_p = None
    for p in cfg.p_grid:
        p_eff = p / nx
        if q.body is not None and not _feasible_many(
                q.body, q.xbar[None, :] + p_eff * x_star[None, :], q.xbar, cfg)[0]:
            continue
        U, n2 = bank.terms(p)
        if free_delta:
            delta_max = max(1.0 / (2.0 * cfg.p_grid[0]), 100.0)
            ok = bool(np.all(d @ U.T <= delta_max * n2 + cfg.tol_mem * np.sqrt(n2) + 1e-12))
        else:
            ok = bool(_ineq_holds(d, U, n2, p, cfg)[0])
        if ok:
            accepted_p = p_eff
            break
    proj = _projection_form(x_star, q)
    return ProxDetail(accepted_p is not None, proj, accepted_p, list(bank.warnings))


def _projection_form(x_star: np.ndarray, q: NormalQuery) -> bool:
    """x̄ ∈ Π(x̄ + t·x*, Ω∩C) with x̄ + t·x* ∈ C, over the t-grid."""
    cfg = q.cfg
    nx = float(np.linalg.norm(x_star))
    if nx <= cfg.tol_mem:
        return True
    target = q.target
    for t in cfg.p_grid:
        t_eff = t / nx
        pt = q.xbar + t_eff * x_star
        if q.body is not None and not _feasible_many(
                q.body, pt[None, :], q.xbar, cfg)[0]:
            continue
        if S_.in_inverse_projector(pt, q.xbar, target, cfg):
            return True
    return False


def prox_normal_cone(q: NormalQuery, free_delta: bool = False,
                     profile: str = "full") -> Cone:
    """Direction-grid sweep of prox membership, returned as a ray cone."""
    cfg = q.cfg
    dim = q.xbar.shape[0]
    dirs = unit_sphere_grid(dim, cfg)
    bank = q.bank(profile)
    accept = _prox_accept_bulk(dirs, q, bank, free_delta)
    meta = {"kind": "prox", "warnings": list(bank.warnings)}
    return make_cone(dim, dirs[accept], cfg=cfg, meta=meta)


# ---------------------------------------------------------------------------
# limiting cone engines


def _ambient_ball(xbar: np.ndarray, r: float, count: int, cfg: ToleranceConfig,
                  tag: str) -> np.ndarray:
    rng = np.random.default_rng(stable_seed(cfg.seed, "ambient", tag,
                                            np.round(xbar, 12), round(r, 15), count))
    dim = xbar.shape[0]
    u = rng.standard_normal((count, dim))
    u /= np.linalg.norm(u, axis=1)[:, None]
    t = rng.random(count) ** (1.0 / dim)
    return xbar[None, :] + r * u * t[:, None]


def _engine_b_batches(q: NormalQuery):
    """Residual directions (x - π)/‖x - π‖ per schedule radius."""
    cfg = q.cfg
    dim = q.xbar.shape[0]
    count = _ENGINE_B_COUNT.get(dim, 1400)
    target = q.target
    batches = []
    attrib = []
    warnings = []
    for i, r in enumerate(cfg.radius_schedule):
        if q.body is None:
            X = _ambient_ball(q.xbar, r, count, cfg, f"engB-{i}-{q.tag()}")
        else:
            X = S_.sample_near(q.body, q.xbar, r, count, cfg, tag=f"engB-{i}-{q.tag()}")
            if X.shape[0] < count // 2:
                warnings.append(f"body sampling shortfall at radius {r:g}")
        D, P, _ = target.nearest_many(X)
        keep = D > cfg.tol_mem
        V = (X[keep] - P[keep]) / D[keep, None]
        batches.append((r, V))
        if isinstance(target, S_.Union):
            # feet on shared faces belong to every member that reaches the
            # minimum, not just the argmin winner
            _, _, ties = target.members_within(X, cfg.tol_mem)
            attrib.append(ties[:, keep].T)
        else:
            attrib.append(None)
    return batches, attrib, warnings


def _attribute_rays(rays: np.ndarray, batches, attrib, cfg: ToleranceConfig) -> dict:
    """Map each final ray to the set members its residuals projected onto."""
    out: dict[int, list[int]] = {}
    if rays.shape[0] == 0:
        return out
    cos_tol = math.cos(cfg.tol_dir)
    for k, ray in enumerate(rays):
        members: set[int] = set()
        for (_, dirs), ties in zip(batches[-6:], attrib[-6:]):
            if dirs.shape[0] == 0 or ties is None:
                continue
            hit = dirs @ ray >= cos_tol
            if np.any(hit):
                members.update(np.flatnonzero(np.any(ties[hit], axis=0)).tolist())
        out[k] = sorted(members)
    return out


def limiting_normal_cone(q: NormalQuery, engine: str = "B") -> Cone:
    """Outer limit of prox cones (A) or projection residuals (B)."""
    cfg = q.cfg
    dim = q.xbar.shape[0]
    if engine.upper() == "B":
        batches, attrib, warnings = _engine_b_batches(q)
        cone = cluster_limits(LimitCluster(tuple(batches)), cfg, dim=dim)
        cone.meta.update(engine="B", kind="limiting", warnings=warnings,
                         piece_members=_attribute_rays(cone.rays, batches, attrib, cfg))
        return cone
    if engine.upper() != "A":
        raise InputError("engine must be 'A' or 'B'")
    target = q.target
    npts = _ENGINE_A_POINTS.get(dim, 4)
    batches = []
    warnings: list[str] = []
    for i, r in enumerate(cfg.radius_schedule):
        X = S_.sample_near(target, q.xbar, r, npts, cfg, tag=f"engA-{i}-{q.tag()}")
        rays_here = []
        for x in X:
            sub = NormalQuery(x, q.omega, q.body, cfg)
            cone = prox_normal_cone(sub, profile="light")
            warnings.extend(cone.meta.get("warnings", ()))
            if cone.rays.shape[0]:
                rays_here.append(cone.rays)
        dirs = np.vstack(rays_here) if rays_here else np.zeros((0, dim))
        batches.append((r, dirs))
    cone = cluster_limits(LimitCluster(tuple(batches)), cfg, dim=dim)
    cone.meta.update(engine="A", kind="limiting", warnings=warnings)
    return cone


# ---------------------------------------------------------------------------
# classical one-sided cones


def frechet_normal_cone(xbar, omega: S_.SetDesc, cfg: ToleranceConfig) -> Cone:
    """Grid test of the limsup quotient ⟨d, u⟩/‖u‖ ≤ 0 at angular slack."""
    xbar = np.asarray(xbar, dtype=float)
    dim = xbar.shape[0]
    dirs = unit_sphere_grid(dim, cfg)
    count = _PROX_SHELL_COUNT.get(dim, 640)
    sin_tol = math.sin(cfg.tol_dir)
    accept = np.ones(dirs.shape[0], dtype=bool)
    for i, r in enumerate(cfg.radius_schedule[-6:]):
        X = S_.sample_near(omega, xbar, r, count, cfg, tag=f"frechet-{i}-{omega.key()}")
        U = X - xbar[None, :]
        n = np.linalg.norm(U, axis=1)
        U = U[n > cfg.tol_mem] / n[n > cfg.tol_mem][:, None]
        if U.shape[0] == 0:
            continue
        accept &= np.max(dirs @ U.T, axis=1) <= sin_tol
    return make_cone(dim, dirs[accept], cfg=cfg, meta={"kind": "frechet"})


def tangent_cone(xbar, omega: S_.SetDesc, cfg: ToleranceConfig) -> Cone:
    """Directions attained by set samples at every schedule radius."""
    xbar = np.asarray(xbar, dtype=float)
    dim = xbar.shape[0]
    count = _PROX_SHELL_COUNT.get(dim, 640)
    batches = []
    for i, r in enumerate(cfg.radius_schedule):
        X = S_.sample_near(omega, xbar, r, count, cfg, tag=f"tangent-{i}-{omega.key()}")
        U = X - xbar[None, :]
        n = np.linalg.norm(U, axis=1)
        batches.append((r, U[n > cfg.tol_mem] / n[n > cfg.tol_mem][:, None]))
    cand = batches[-1][1]
    if cand.shape[0] == 0:
        return make_cone(dim, np.zeros((0, dim)), cfg=cfg, meta={"kind": "tangent"})
    cos_tol = math.cos(cfg.tol_dir)
    keep = np.ones(cand.shape[0], dtype=bool)
    for _, dirs in batches[:-1]:
        if dirs.shape[0] == 0:
            keep[:] = False
            break
        keep &= np.max(cand @ dirs.T, axis=1) >= cos_tol
    return make_cone(dim, cand[keep], cfg=cfg, meta={"kind": "tangent"})