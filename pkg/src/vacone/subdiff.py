"""Subdifferentials with respect to a convex body, through the epigraph.

The proximal set is decided by the local inequality
    <x*, x - xbar> - (f(x) - f(xbar)) <= delta ||x - xbar||^2
over sampled x in C near xbar, with the feasibility clause xbar + p x* in C,
and cross-checked against proximal normality of (x*, -1) to the epigraph.
The limiting and singular sets are slices of the epigraph's limiting normal
cone at last component -1 and 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import ToleranceConfig
from .errors import InputError
from . import sets as S_
from .scalarfn import ScalarFn
from .cones import Cone, cone_slice, make_cone, unit_sphere_grid
from .coderivatives import MultiMap, coderivative_wrt
from .normals import NormalQuery, limiting_normal_cone, prox_normal_member

_MAG_GRID = tuple(2.0 ** k for k in range(-8, 5))
_SAMPLE_COUNT = {1: 96, 2: 256, 3: 512}
_BISECT_ITERS = 12


@dataclass
class SubdiffResult:
    proximal: np.ndarray
    limiting: np.ndarray
    singular: Cone
    diagnostics: list[str] = field(default_factory=list)


def epigraph(f: ScalarFn, C: S_.SetDesc | None = None) -> S_.SetDesc:
    """Epigraph of f, cut by the cylinder C x R when a body is given."""
    epi = S_.Epigraph(f, above=True)
    if C is None:
        return epi
    if C.dim != 1:
        raise InputError("scalar epigraph restriction needs a body in R")
    return S_.intersect(epi, S_.product_of(C, S_.full_space(1)))


def _f_at(f: ScalarFn, x: float, cfg: ToleranceConfig) -> float:
    return float(f.value_many(np.array([x]), cfg.tol_mem)[0])


def _on_domain(f: ScalarFn, xbar: float, C: S_.SetDesc, cfg: ToleranceConfig) -> bool:
    return S_.membership(np.atleast_1d(xbar), C, cfg) and np.isfinite(_f_at(f, xbar, cfg))


class _IneqBank:
    """Increments u = x - xbar over C samples with the matching f gaps."""

    def __init__(self, f: ScalarFn, xbar: float, C: S_.SetDesc, cfg: ToleranceConfig):
        count = _SAMPLE_COUNT.get(C.dim, 512)
        fbar = _f_at(f, xbar, cfg)
        self.warnings: list[str] = []
        parts = []
        for i, r in enumerate(cfg.radius_schedule):
            X = S_.sample_near(C, np.atleast_1d(xbar), r, count, cfg,
                               tag=f"subdiff-{i}-{f.name}-{C.key()}")
            if X.shape[0] < count // 2:
                self.warnings.append(f"sampling shortfall at radius {r:g}")
            parts.append(X)
        parts.append(self._ladder(xbar, C))
        X = np.vstack(parts)
        self.U = X - xbar
        self.n2 = np.sum(self.U ** 2, axis=1)
        # exact branch assignment; a tolerance would clip sub-tol samples
        # onto the neighboring piece and corrupt the gap at that scale
        vals = f.value_many(X[:, 0], 0.0)
        gap = vals - fbar
        # infinite f(x) satisfies the inequality vacuously
        self.gap = np.where(np.isfinite(gap), gap, np.inf)

    @staticmethod
    def _ladder(xbar: float, C: S_.SetDesc) -> np.ndarray:
        """Geometric points below the shell schedule's finest radius.

        The inequality binds at scale ~ p ||x*||, which for small p sits far
        under the random shells; without these the delta = 1/(2p) sweep is
        vacuous there and wrong magnitudes slip through.
        """
        offs = np.array([2.0 ** -k for k in range(5, 35)])
        pts = np.concatenate([xbar + offs, xbar - offs])[:, None]
        if C.dim != 1:
            return np.zeros((0, C.dim))
        D, _, _ = C.nearest_many(pts)
        return pts[D <= 1e-12]


def _accept_candidates(cands: np.ndarray, bank: _IneqBank, xbar: float,
                       C: S_.SetDesc, cfg: ToleranceConfig) -> np.ndarray:
    """Existence sweep over p for feasibility and delta for the inequality."""
    lhs_dir = cands @ bank.U.T                      # (k, s)
    accept = np.zeros(cands.shape[0], dtype=bool)
    norms = np.linalg.norm(cands, axis=1)
    slack = (cfg.tol_mem + 1e-12) * np.sqrt(bank.n2) + 1e-15
    for p in cfg.p_grid:
        todo = ~accept
        if not np.any(todo):
            break
        pts = xbar + p * cands[todo]
        D, _, _ = C.nearest_many(pts)
        # tolerance scales with the step, else small steps graze out of C
        feas = D <= cfg.tol_mem * p * norms[todo] + 1e-15
        if not np.any(feas):
            continue
        delta = max(1.0 / (2.0 * p), 100.0)
        rhs = delta * bank.n2 + bank.gap + slack
        ok = np.all(lhs_dir[todo][feas] <= rhs[None, :], axis=1)
        idx = np.flatnonzero(todo)[feas]
        accept[idx[ok]] = True
    return accept


def _accept_one(x_star: np.ndarray, bank: _IneqBank, xbar: float,
                C: S_.SetDesc, cfg: ToleranceConfig) -> bool:
    return bool(_accept_candidates(x_star[None, :], bank, xbar, C, cfg)[0])


def proximal_subdiff_wrt(f: ScalarFn, xbar: float, C: S_.SetDesc,
                         cfg: ToleranceConfig,
                         diagnostics: list[str] | None = None) -> np.ndarray:
    """Accepted x* candidates; per direction the interval ends are refined."""
    if not _on_domain(f, xbar, C, cfg):
        return np.zeros((0, C.dim))
    bank = _IneqBank(f, xbar, C, cfg)
    if diagnostics is not None:
        diagnostics.extend(bank.warnings)
    dirs = unit_sphere_grid(C.dim, cfg)
    mags = np.asarray(_MAG_GRID)
    out: list[np.ndarray] = []
    zero = np.zeros(C.dim)
    if _accept_one(zero, bank, xbar, C, cfg):
        out.append(zero)
    for d in dirs:
        cands = mags[:, None] * d[None, :]
        acc = _accept_candidates(cands, bank, xbar, C, cfg)
        if not np.any(acc):
            continue
        ai = np.flatnonzero(acc)
        m_lo, m_hi = mags[ai[0]], mags[ai[-1]]
        # refine the outer ends of the accepted magnitude interval
        lo_out = mags[ai[0] - 1] if ai[0] > 0 else 0.0
        m_lo = _bisect_mag(lo_out, m_lo, d, bank, xbar, C, cfg, accept_hi=True)
        if ai[-1] + 1 < mags.size:
            m_hi = _bisect_mag(mags[ai[-1] + 1], m_hi, d, bank, xbar, C, cfg,
                               accept_hi=False)
        out.append(m_lo * d)
        if abs(m_hi - m_lo) > cfg.tol_mem:
            out.append(m_hi * d)
    if not out:
        return np.zeros((0, C.dim))
    return _dedup_rows(np.asarray(out))


def _bisect_mag(m_bad: float, m_good: float, d: np.ndarray, bank: _IneqBank,
                xbar: float, C: S_.SetDesc, cfg: ToleranceConfig,
                accept_hi: bool) -> float:
    """Boundary magnitude between a rejected and an accepted candidate."""
    lo, hi = (m_bad, m_good) if accept_hi else (m_good, m_bad)
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        ok = _accept_one(mid * d, bank, xbar, C, cfg)
        if ok == accept_hi:
            hi = mid
        else:
            lo = mid
    return hi if accept_hi else lo


def _dedup_rows(P: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    keep: list[np.ndarray] = []
    for row in P:
        if all(np.linalg.norm(row - k) > tol for k in keep):
            keep.append(row)
    return np.asarray(keep)


def proximal_epi_accepts(f: ScalarFn, xbar: float, C: S_.SetDesc,
                         candidates: np.ndarray, cfg: ToleranceConfig) -> np.ndarray:
    """Epigraph-route verdicts: (x*, -1) proximally normal to epi f at C x R."""
    fbar = _f_at(f, xbar, cfg)
    base = np.concatenate([np.atleast_1d(xbar), [fbar]])
    q = NormalQuery(base, S_.Epigraph(f, above=True),
                    S_.product_of(C, S_.full_space(1)), cfg)
    out = np.zeros(candidates.shape[0], dtype=bool)
    for i, x_star in enumerate(np.atleast_2d(candidates)):
        out[i] = prox_normal_member(np.concatenate([x_star, [-1.0]]), q)
    return out


def _epi_normal_cone(f: ScalarFn, xbar: float, C: S_.SetDesc,
                     cfg: ToleranceConfig, engine: str = "B") -> Cone:
    fbar = _f_at(f, xbar, cfg)
    base = np.concatenate([np.atleast_1d(xbar), [fbar]])
    q = NormalQuery(base, S_.Epigraph(f, above=True),
                    S_.product_of(C, S_.full_space(1)), cfg)
    q.validate()
    return limiting_normal_cone(q, engine=engine)


def limiting_subdiff_wrt(f: ScalarFn, xbar: float, C: S_.SetDesc,
                         cfg: ToleranceConfig, engine: str = "B",
                         prox_rows: np.ndarray | None = None) -> np.ndarray:
    """Slice of the epigraph's limiting cone at last component -1.

    The proximal set is folded in; it is always contained in the limiting
    set and its refined interval ends are sharper than clustered rays.
    """
    if not _on_domain(f, xbar, C, cfg):
        return np.zeros((0, C.dim))
    K = _epi_normal_cone(f, xbar, C, cfg, engine)
    pts = cone_slice(K, slice(C.dim, C.dim + 1), np.array([-1.0]), cfg)
    if prox_rows is None:
        prox_rows = proximal_subdiff_wrt(f, xbar, C, cfg)
    if prox_rows.shape[0]:
        pts = np.vstack([pts, prox_rows])
    return _dedup_rows(pts) if pts.shape[0] else pts


def singular_subdiff_wrt(f: ScalarFn, xbar: float, C: S_.SetDesc,
                         cfg: ToleranceConfig, engine: str = "B") -> Cone:
    """Slice at last component 0, returned as a cone of x* rays."""
    if not _on_domain(f, xbar, C, cfg):
        return make_cone(C.dim, np.zeros((0, C.dim)), cfg=cfg,
                         meta={"kind": "singular", "off_domain": True})
    K = _epi_normal_cone(f, xbar, C, cfg, engine)
    pts = cone_slice(K, slice(C.dim, C.dim + 1), np.array([0.0]), cfg)
    norms = np.linalg.norm(pts, axis=1)
    rays = pts[norms > cfg.tol_mem]
    return make_cone(C.dim, rays, cfg=cfg, meta={"kind": "singular"})


def subdifferentials_wrt(f: ScalarFn, xbar: float, C: S_.SetDesc,
                         cfg: ToleranceConfig) -> SubdiffResult:
    diags: list[str] = []
    prox = proximal_subdiff_wrt(f, xbar, C, cfg, diagnostics=diags)
    lim = limiting_subdiff_wrt(f, xbar, C, cfg, prox_rows=prox)
    sing = singular_subdiff_wrt(f, xbar, C, cfg)
    diags.extend(sing.meta.get("warnings", ()))
    return SubdiffResult(prox, lim, sing, diags)


def profile_map(f: ScalarFn) -> MultiMap:
    """The map x -> f(x) + R_+, whose graph is the epigraph of f."""
    lo, hi = f.dom_bounds()
    dom = S_.Box(lo=np.array([lo]), hi=np.array([hi]))
    return MultiMap(1, 1, S_.Epigraph(f, above=True), dom, label=f"profile:{f.name}")


def profile_coderivative(f: ScalarFn, xbar: float, C: S_.SetDesc, lam: float,
                         cfg: ToleranceConfig, engine: str = "B"):
    """Coderivative of the profile map at (x̄, f(x̄)) applied to lambda.

    Positive lambda scales the limiting set, zero returns the singular
    cone, negative lambda comes back empty.
    """
    if not _on_domain(f, xbar, C, cfg):
        return np.zeros((0, 1)) if abs(lam) > cfg.tol_mem else make_cone(
            1, np.zeros((0, 1)), cfg=cfg, meta={"kind": "profile", "off_domain": True})
    F = profile_map(f)
    fbar = _f_at(f, xbar, cfg)
    if abs(lam) <= cfg.tol_mem:
        from .coderivatives import coderivative_graph_wrt

        Kp = coderivative_graph_wrt(F, xbar, fbar, C, cfg, engine=engine)
        pts = cone_slice(Kp, slice(0, 1), np.array([0.0]), cfg)
        rays = pts[np.linalg.norm(pts, axis=1) > cfg.tol_mem]
        return make_cone(1, rays, cfg=cfg, meta={"kind": "profile"})
    return coderivative_wrt(F, xbar, fbar, np.array([lam]), C, cfg, engine=engine)
