"""Decision procedures built on the relative cones.

Aubin property with respect to a body (dual criterion on the coderivative
cone's zero slice, exact constant from ray ratios), relative Aubin property,
local Lipschitz continuity relative to a body, first-order stationarity, and
a piecewise screen for local minimality.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

import math

from .config import ToleranceConfig
from .errors import InputError
from . import sets as S_
from . import subdiff as SD_
from .cones import Cone
from .coderivatives import MultiMap, coderivative_graph_wrt
from .scalarfn import ScalarFn

# magnitude floor separating a live x* block from floating-point noise
_EPS_Z = 1e-3
_PAIR_COUNT = 220


@dataclass
class AubinVerdict:
    holds: bool
    constant_estimate: float
    zero_slice: np.ndarray
    witness_rays: np.ndarray
    direct_estimate: float
    direct_by_radius: tuple[float, ...] = ()
    piece_contributions: tuple[int, ...] = ()
    diagnostics: list[str] = field(default_factory=list)


@dataclass
class LipschitzVerdict:
    holds: bool
    lip_estimate: float
    singular_cone: Cone
    subdiff_bound: float
    ratio_by_radius: tuple[float, ...] = ()
    diagnostics: list[str] = field(default_factory=list)


@dataclass
class StationarityReport:
    holds: bool
    p: float | None = None
    delta: float | None = None
    violator: np.ndarray | None = None

    def __bool__(self) -> bool:
        return self.holds


@dataclass
class PiecewiseVerdict:
    reports: list[StationarityReport]
    failing: list[int]
    minimizer_ruled_out: bool


def aubin_wrt(F: MultiMap, xbar, ybar, C: S_.SetDesc, cfg: ToleranceConfig,
              engine: str = "B", eps_z: float = _EPS_Z) -> AubinVerdict:
    """Dual criterion: no coderivative ray maps a vanishing y* to a live x*.

    The cone is positively homogeneous, so the unit-ball supremum behind the
    exact constant reduces to the max ray ratio ||x*|| / ||y*||.  Rays are
    resolved only to tol_dir angularly, so a ray counts as sitting in the
    zero slice when its angle to the subspace {y* = 0} is below tol_dir;
    anything closer than the resolution cannot be told apart from a genuine
    slice member.
    """
    K = coderivative_graph_wrt(F, xbar, ybar, C, cfg, engine=engine)
    m, n = F.m, F.n
    rays = K.rays
    if rays.shape[0] == 0:
        zero = np.zeros((1, n))
        direct, by_r = _aubin_direct(F, xbar, ybar, C, cfg)
        return AubinVerdict(True, 0.0, zero, rays, direct, by_r, (),
                            list(K.meta.get("warnings", ())))
    yb = np.linalg.norm(rays[:, :m], axis=1)
    xb = np.linalg.norm(rays[:, m:], axis=1)
    in_slice = yb <= max(math.sin(cfg.tol_dir), eps_z)
    bad = in_slice & (xb > eps_z)
    zero_rows = [np.zeros(n)]
    for r in rays[bad]:
        zero_rows.append(r[m:] / max(np.linalg.norm(r[m:]), 1e-300))
    zero_slice = np.asarray(zero_rows)
    holds = not np.any(bad)
    live = ~in_slice
    if np.any(live):
        ratios = xb[live] / yb[live]
        kappa = float(np.max(ratios))
    else:
        kappa = 0.0
    constant = kappa if holds else float("inf")
    # a failing verdict is witnessed by the offending rays; a holding one by
    # every live ray, since the constant is the sup of their ratios
    wit_idx = np.flatnonzero(bad) if not holds else np.flatnonzero(live)
    witness = rays[wit_idx]
    members = K.meta.get("piece_members", {})
    pieces: set[int] = set()
    for k in wit_idx:
        pieces.update(members.get(int(k), ()))
    direct, by_r = _aubin_direct(F, xbar, ybar, C, cfg)
    return AubinVerdict(holds, constant, zero_slice, witness, direct, by_r,
                        tuple(sorted(pieces)), list(K.meta.get("warnings", ())))


def relative_aubin(F: MultiMap, xbar, ybar, cfg: ToleranceConfig,
                   engine: str = "B") -> AubinVerdict:
    """Aubin property relative to the map's own domain."""
    if F.dom is None:
        raise InputError("relative Aubin needs the map's domain")
    return aubin_wrt(F, xbar, ybar, F.dom, cfg, engine=engine)


def _aubin_direct(F: MultiMap, xbar, ybar, C: S_.SetDesc,
                  cfg: ToleranceConfig) -> tuple[float, tuple[float, ...]]:
    """Sampled constant from the primal inclusion, for cross-checking only.

    Pairs (x, y) in gph F with x in C give the left side; the fiber over a
    second body point u is approximated by graph samples whose first block
    sits within eta of u.  Estimates are taken at the two smallest schedule
    radii so tests can watch them stabilize.
    """
    n = F.n
    xb = np.atleast_1d(np.asarray(xbar, float))
    base = np.concatenate([xb, np.atleast_1d(np.asarray(ybar, float))])
    out = []
    for r in cfg.radius_schedule[-2:]:
        G = S_.sample_near(F.graph, base, r, 320, cfg,
                           tag=f"aubin-direct-{r:g}-{F.label}")
        G = G[C.contains_many(G[:, :n], cfg.tol_mem)]
        U = S_.sample_near(C, xb, r, 48, cfg,
                           tag=f"aubin-direct-u-{r:g}-{F.label}")
        if G.shape[0] < 4:
            out.append(0.0)
            continue
        best = 0.0
        for u in U:
            D = S_.fiber_distance(F.graph, n, u, G[:, n:], cfg)
            gaps = np.linalg.norm(G[:, :n] - u[None, :], axis=1)
            mask = (gaps >= r / 50.0) & np.isfinite(D)
            if np.any(mask):
                best = max(best, float(np.max(D[mask] / gaps[mask])))
            if np.any((gaps >= r / 50.0) & ~np.isfinite(D)):
                best = float("inf")
        out.append(best)
    return max(out), tuple(out)


def lipschitz_wrt(f: ScalarFn, xbar: float, C: S_.SetDesc,
                  cfg: ToleranceConfig) -> LipschitzVerdict:
    """Relative Lipschitz continuity, decided by the singular cone."""
    sing = SD_.singular_subdiff_wrt(f, xbar, C, cfg)
    holds = sing.rays.shape[0] == 0 and not sing.meta.get("off_domain", False)
    lim = SD_.limiting_subdiff_wrt(f, xbar, C, cfg)
    bound = float(np.max(np.linalg.norm(lim, axis=1))) if lim.shape[0] else 0.0
    by_r = _ratio_sups(f, xbar, C, cfg)
    lip = _trend(by_r)
    diags = list(sing.meta.get("warnings", ()))
    return LipschitzVerdict(holds, lip, sing, bound, tuple(by_r), diags)


def _ratio_sups(f: ScalarFn, xbar: float, C: S_.SetDesc,
                cfg: ToleranceConfig) -> list[float]:
    """Per-radius sampled sup of |f(x) - f(u)| / |x - u| over pairs in C."""
    out = []
    for r in cfg.radius_schedule:
        X = S_.sample_near(C, np.atleast_1d(xbar), r, _PAIR_COUNT, cfg,
                           tag=f"lip-{r:g}-{f.name}")
        x = X[:, 0]
        v = f.value_many(x, 0.0)
        fin = np.isfinite(v)
        x, v = x[fin], v[fin]
        if x.size < 4:
            out.append(0.0)
            continue
        dx = np.abs(x[:, None] - x[None, :])
        dv = np.abs(v[:, None] - v[None, :])
        mask = dx >= r / 50.0
        out.append(float(np.max(dv[mask] / dx[mask])) if np.any(mask) else 0.0)
    return out


def _trend(sups: list[float]) -> float:
    """Sup across the schedule, or +inf when it keeps growing as r shrinks."""
    e = np.asarray(sups)
    if e.size >= 4 and e[-1] > 2.0 * e[e.size // 2] + 0.05 and e[-1] > 10.0 * e[0]:
        return float("inf")
    return float(np.max(e)) if e.size else 0.0


def stationarity_check(f: ScalarFn, xbar: float, C: S_.SetDesc,
                       cfg: ToleranceConfig) -> StationarityReport:
    """0 in the proximal subdifferential, with the accepting pair as certificate."""
    if not S_.membership(np.atleast_1d(xbar), C, cfg):
        raise InputError("base point must lie in the body")
    bank = SD_._IneqBank(f, xbar, C, cfg)
    slack = (cfg.tol_mem + 1e-12) * np.sqrt(bank.n2) + 1e-15
    worst_val, worst_u = np.inf, None
    for p in cfg.p_grid:
        delta = max(1.0 / (2.0 * p), 100.0)
        rhs = delta * bank.n2 + bank.gap + slack
        low = float(np.min(rhs)) if rhs.size else 0.0
        if low >= 0.0:
            return StationarityReport(True, p, delta)
        if low < worst_val:
            worst_val = low
            worst_u = bank.U[int(np.argmin(rhs))]
    violator = None if worst_u is None else np.atleast_1d(xbar) + worst_u
    return StationarityReport(False, violator=violator)


def piecewise_screen(f: ScalarFn, xbar: float, pieces: list[S_.SetDesc],
                     cfg: ToleranceConfig) -> PiecewiseVerdict:
    """Necessary condition for a local minimizer, tested piece by piece.

    A local solution on the union is a local solution on every piece, so a
    single failing piece rules the minimizer out.
    """
    if not pieces:
        raise InputError("need at least one piece")
    xb = np.atleast_1d(xbar)
    for i, P in enumerate(pieces):
        if not S_.membership(xb, P, cfg):
            raise InputError(f"base point not in piece {i}")
    _check_cover(f, xbar, pieces, cfg)
    reports = [stationarity_check(f, xbar, P, cfg) for P in pieces]
    failing = [i for i, rep in enumerate(reports) if not rep.holds]
    return PiecewiseVerdict(reports, failing, bool(failing))


def _check_cover(f: ScalarFn, xbar: float, pieces: list[S_.SetDesc],
                 cfg: ToleranceConfig) -> None:
    lo, hi = f.dom_bounds()
    dom = S_.Box(lo=np.array([lo]), hi=np.array([hi]))
    for r in (cfg.radius_schedule[0], cfg.radius_schedule[len(cfg.radius_schedule) // 2]):
        X = S_.sample_near(dom, np.atleast_1d(xbar), r, 64, cfg,
                           tag=f"cover-{r:g}-{f.name}")
        covered = np.zeros(X.shape[0], dtype=bool)
        for P in pieces:
            covered |= P.contains_many(X, cfg.tol_mem)
        if not np.all(covered):
            x_miss = X[~covered][0]
            raise InputError(f"pieces do not cover the neighborhood near {x_miss}")
