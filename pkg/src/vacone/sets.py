"""Set descriptions and exact-where-possible projections.

The primitives are polyhedra (finite systems <a_i, x> <= b_i), boxes,
parametric curves, epigraphs/hypographs of piecewise scalar functions,
and the product / union / intersection combinators.  Projection onto a
polyhedron is exact (active-set enumeration over row subsets of size up
to the dimension); curves and graph regions reduce to one-dimensional
scans with golden-section refinement; intersections are canonicalized
structurally (distributed over unions, polyhedral members merged) so
that the exact paths cover them whenever the structure allows.

Every operation that matters downstream exists in a batched form
(`nearest_many`) because limit computations project large clouds of
sample points.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable, Sequence

import numpy as np

from .config import ToleranceConfig, stable_seed
from .errors import InputError, NumericalFailure
from .scalarfn import ScalarFn

__all__ = [
    "SetDesc", "Polyhedron", "Box", "CurveGraph", "Epigraph", "Product",
    "Union", "GenericIntersection", "full_space", "halfplane", "intersect",
    "product_of", "union_of", "membership", "distance", "project",
    "sample_near", "in_inverse_projector",
]

WORKING_HALF_WIDTH = 1e3   # truncation for unbounded sets around a query
_CHUNK = 262144            # row chunk for batched polyhedral projection


def _as_points(X: np.ndarray, dim: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != dim:
        raise InputError(f"expected points of dimension {dim}, got shape {X.shape}")
    return X


class SetDesc:
    """Base class: a nonempty subset of R^dim with a projection oracle."""

    dim: int

    # (dist, point, member) for one nearest point per row of X; member is
    # the top-level union member index, -1 when not a union.
    def nearest_many(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        raise NotImplementedError

    def project_all(self, x: np.ndarray, tol: float) -> list[np.ndarray]:
        """All projection points, within tol of the least distance."""
        d, p, _ = self.nearest_many(np.asarray(x, dtype=float)[None, :])
        return [p[0]]

    def contains_many(self, X: np.ndarray, tol: float) -> np.ndarray:
        """Structural feasibility at tolerance tol (cheap, vectorized)."""
        d, _, _ = self.nearest_many(X)
        return d <= tol

    def key(self) -> str:
        raise NotImplementedError

    def __repr__(self) -> str:  # keys are structural and short
        return self.key()


# ---------------------------------------------------------------------------
# polyhedra


def _row_subsets(m: int, d: int) -> list[tuple[int, ...]]:
    out: list[tuple[int, ...]] = []
    for k in range(1, min(m, d) + 1):
        out.extend(itertools.combinations(range(m), k))
    if len(out) > 40000:
        raise InputError("polyhedron too complex for active-set enumeration")
    return out


class Polyhedron(SetDesc):
    """{x : A x <= b} with unit-norm rows.  May be empty; may be all of R^d."""

    def __init__(self, A: np.ndarray, b: np.ndarray, dim: int | None = None):
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float).ravel()
        if A.size == 0:
            if dim is None:
                raise InputError("empty row system needs an explicit dimension")
            A = np.zeros((0, dim))
            b = np.zeros((0,))
        if A.ndim != 2 or A.shape[0] != b.shape[0]:
            raise InputError("row system shape mismatch")
        norms = np.linalg.norm(A, axis=1)
        keep = norms > 0.0
        if np.any(~keep & (b < 0)):
            raise InputError("row 0 <= b with b < 0: empty polyhedron")
        A, b, norms = A[keep], b[keep], norms[keep]
        self.A = A / norms[:, None]
        self.b = b / np.where(norms > 0, norms, 1.0)
        self.dim = A.shape[1] if dim is None else dim
        self._subsets: list[tuple[tuple[int, ...], np.ndarray, np.ndarray]] | None = None

    def key(self) -> str:
        rows = np.round(np.column_stack([self.A, self.b]), 12)
        return f"poly{self.dim}:{rows.tobytes().hex()[:40]}:{rows.shape[0]}"

    def margins(self, X: np.ndarray) -> np.ndarray:
        X = _as_points(X, self.dim)
        if self.A.shape[0] == 0:
            return np.zeros((X.shape[0],))
        return np.max(X @ self.A.T - self.b, axis=1)

    def contains_many(self, X: np.ndarray, tol: float) -> np.ndarray:
        # rows are unit-norm, so a single violated row understates the
        # Euclidean distance by at most a sqrt(k) factor; margins <= tol
        # certifies distance <= tol * sqrt(#rows), good enough internally
        return self.margins(X) <= tol

    def _prepared(self):
        if self._subsets is None:
            subs = []
            for idx in _row_subsets(self.A.shape[0], self.dim):
                As = self.A[list(idx)]
                G = As @ As.T
                # skip rank-deficient active sets; a full-rank one always
                # realizes the optimum
                if np.linalg.matrix_rank(G, tol=1e-12) < len(idx):
                    continue
                subs.append((idx, As, np.linalg.inv(G)))
            self._subsets = subs
        return self._subsets

    def nearest_many(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        X = _as_points(X, self.dim)
        n = X.shape[0]
        if n > _CHUNK:
            parts = [self.nearest_many(X[i:i + _CHUNK]) for i in range(0, n, _CHUNK)]
            return (np.concatenate([p[0] for p in parts]),
                    np.concatenate([p[1] for p in parts]),
                    np.concatenate([p[2] for p in parts]))
        P = np.full_like(X, np.nan)
        D2 = np.full((n,), np.inf)
        marg = self.margins(X)
        inside = marg <= 0.0
        P[inside] = X[inside]
        D2[inside] = 0.0
        todo = ~inside
        if np.any(todo):
            Xt = X[todo]
            bestd2 = np.full((Xt.shape[0],), np.inf)
            bestp = np.full_like(Xt, np.nan)
            for idx, As, Ginv in self._prepared():
                resid = Xt @ As.T - self.b[list(idx)]      # (n, k)
                lam = resid @ Ginv.T                        # (n, k)
                U = Xt - lam @ As                           # (n, d)
                ok = np.all(lam >= -1e-10, axis=1)
                if not np.any(ok):
                    continue
                feas = self.margins(U[ok]) <= 1e-12
                sel = np.where(ok)[0][feas]
                if sel.size == 0:
                    continue
                d2 = np.sum((U[sel] - Xt[sel]) ** 2, axis=1)
                better = d2 < bestd2[sel]
                upd = sel[better]
                bestd2[upd] = d2[better]
                bestp[upd] = U[sel][better]
            P[todo] = bestp
            D2[todo] = bestd2
        return np.sqrt(D2), P, np.full((n,), -1, dtype=int)

    def project_all(self, x: np.ndarray, tol: float) -> list[np.ndarray]:
        d, p, _ = self.nearest_many(np.asarray(x, dtype=float)[None, :])
        if not np.isfinite(d[0]):
            raise NumericalFailure("projection onto an empty polyhedron")
        return [p[0]]

    def as_polyhedron(self):
        return self

    def is_bounded_hint(self) -> bool:
        return False


class Box(SetDesc):
    """Axis-aligned box; +-inf bounds allowed."""

    def __init__(self, lo: Sequence[float], hi: Sequence[float]):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1:
            raise InputError("box bounds shape mismatch")
        if np.any(self.lo > self.hi):
            raise InputError("empty box")
        self.dim = self.lo.shape[0]

    def key(self) -> str:
        return f"box:{self.lo.tolist()}:{self.hi.tolist()}"

    def nearest_many(self, X: np.ndarray):
        X = _as_points(X, self.dim)
        P = np.clip(X, self.lo, self.hi)
        D = np.linalg.norm(P - X, axis=1)
        return D, P, np.full((X.shape[0],), -1, dtype=int)

    def contains_many(self, X: np.ndarray, tol: float) -> np.ndarray:
        X = _as_points(X, self.dim)
        return np.all((X >= self.lo - tol) & (X <= self.hi + tol), axis=1)

    def as_polyhedron(self) -> Polyhedron:
        rows, rhs = [], []
        for i in range(self.dim):
            e = np.zeros(self.dim)
            if np.isfinite(self.hi[i]):
                e2 = e.copy(); e2[i] = 1.0
                rows.append(e2); rhs.append(self.hi[i])
            if np.isfinite(self.lo[i]):
                e2 = e.copy(); e2[i] = -1.0
                rows.append(e2); rhs.append(-self.lo[i])
        return Polyhedron(np.asarray(rows).reshape(-1, self.dim), np.asarray(rhs), dim=self.dim)


def full_space(dim: int) -> Box:
    return Box([-np.inf] * dim, [np.inf] * dim)


def halfplane(normal: Sequence[float], offset: float = 0.0) -> Polyhedron:
    """{x : <normal, x> <= offset}."""
    a = np.asarray(normal, dtype=float)
    return Polyhedron(a[None, :], np.array([offset]))


# ---------------------------------------------------------------------------
# one-dimensional scans (curves and graph regions)


def _golden(phi, lo, hi, iters: int = 60):
    """Vectorized golden-section; returns argmin of phi over [lo, hi].

    Tolerates +inf values of phi (infeasible regions); callers fall back
    to their coarse sample if the whole bracket is infeasible.
    """
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    invphi2 = (3.0 - math.sqrt(5.0)) / 2.0
    a = np.asarray(lo, dtype=float).copy()
    b = np.asarray(hi, dtype=float).copy()
    h = b - a
    c = a + invphi2 * h
    d = a + invphi * h
    fc = phi(c)
    fd = phi(d)
    for _ in range(iters):
        left = fc < fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        h = b - a
        c = a + invphi2 * h
        d = a + invphi * h
        fc = phi(c)
        fd = phi(d)
    return np.where(fc < fd, c, d)


class CurveGraph(SetDesc):
    """Parametric curve {gamma(t) : t in [t_lo, t_hi]} in R^dim.

    gamma must map an array of parameters (n,) to points (n, dim).
    When the curve is the graph of a scalar function (gamma(t) = (t, g(t))),
    pass graph_fn=g; structural membership tests become exact instead of
    cloud-based.
    """

    def __init__(self, gamma: Callable[[np.ndarray], np.ndarray],
                 t_lo: float, t_hi: float, dim: int, label: str = "",
                 graph_fn: ScalarFn | None = None):
        if not t_lo < t_hi:
            raise InputError("curve parameter interval is empty")
        self.gamma = gamma
        self.t_lo = float(t_lo)
        self.t_hi = float(t_hi)
        self.dim = dim
        self.label = label
        self.graph_fn = graph_fn

    def key(self) -> str:
        return f"curve:{self.label}:{self.t_lo}:{self.t_hi}:{self.dim}"

    def _t_window(self, X: np.ndarray) -> tuple[float, float]:
        # clamp the parameter range to the working box around the batch
        mid = float(np.mean(X)) if X.size else 0.0
        lo = max(self.t_lo, mid - WORKING_HALF_WIDTH)
        hi = min(self.t_hi, mid + WORKING_HALF_WIDTH)
        if not lo < hi:
            lo, hi = max(self.t_lo, -WORKING_HALF_WIDTH), min(self.t_hi, WORKING_HALF_WIDTH)
        return lo, hi

    def _feasible_grid(self, lo: float, hi: float, n: int, poly: Polyhedron | None):
        ts = np.linspace(lo, hi, n)
        if poly is not None:
            pts = self.gamma(ts)
            mask = poly.margins(pts) <= 1e-12
            return ts, mask
        return ts, np.ones_like(ts, dtype=bool)

    def nearest_many(self, X: np.ndarray, poly: Polyhedron | None = None):
        X = _as_points(X, self.dim)
        n = X.shape[0]
        if n > 4096:
            parts = [self.nearest_many(X[i:i + 4096], poly=poly) for i in range(0, n, 4096)]
            return (np.concatenate([p[0] for p in parts]),
                    np.concatenate([p[1] for p in parts]),
                    np.concatenate([p[2] for p in parts]))
        lo, hi = self._t_window(X)
        ngrid = 4096
        ts, feas = self._feasible_grid(lo, hi, ngrid, poly)
        if not np.any(feas):
            raise NumericalFailure("curve has no feasible parameters in the working window")
        pts = self.gamma(ts)                                   # (g, d)
        # |x - p|^2 via the dot-product expansion keeps memory at (n, g)
        d2 = (np.sum(X ** 2, axis=1)[:, None] + np.sum(pts ** 2, axis=1)[None, :]
              - 2.0 * X @ pts.T)
        d2[:, ~feas] = np.inf
        h = (hi - lo) / (ngrid - 1)

        if poly is None:
            def phi(t, X=X):
                return np.sum((self.gamma(t) - X) ** 2, axis=1)
        else:
            def phi(t, X=X):
                p = self.gamma(t)
                val = np.sum((p - X) ** 2, axis=1)
                return np.where(poly.margins(p) > 1e-12, np.inf, val)

        # refine up to 4 candidate cells per query (covers near-ties)
        order = np.argsort(d2, axis=1)[:, :4]
        bestd = np.full((n,), np.inf)
        bestt = np.zeros((n,))
        for k in range(order.shape[1]):
            tc = ts[order[:, k]]
            tlo = np.maximum(tc - 2 * h, lo)
            thi = np.minimum(tc + 2 * h, hi)
            tstar = _golden(phi, tlo, thi)
            # a window with infeasible edges can defeat golden section;
            # fall back to the coarse sample in that case
            val = phi(tstar)
            coarse = np.maximum(d2[np.arange(n), order[:, k]], 0.0)
            stuck = ~np.isfinite(val) | (val > coarse)
            tstar = np.where(stuck, tc, tstar)
            val = np.where(stuck, coarse, val)
            better = val < bestd
            bestd = np.where(better, val, bestd)
            bestt = np.where(better, tstar, bestt)
        P = self.gamma(bestt)
        D = np.sqrt(np.maximum(bestd, 0.0))
        return D, P, np.full((n,), -1, dtype=int)

    def project_all(self, x: np.ndarray, tol: float, poly: Polyhedron | None = None) -> list[np.ndarray]:
        x = np.asarray(x, dtype=float)
        lo, hi = self._t_window(x[None, :])
        ngrid = 8192
        ts, feas = self._feasible_grid(lo, hi, ngrid, poly)
        pts = self.gamma(ts)
        d = np.linalg.norm(pts - x[None, :], axis=1)
        d[~feas] = np.inf
        dmin = float(np.min(d))
        if not np.isfinite(dmin):
            raise NumericalFailure("curve projection found no feasible point")
        h = (hi - lo) / (ngrid - 1)
        # cells competitive within one grid step of the optimum
        slope = float(np.max(np.linalg.norm(np.diff(pts, axis=0), axis=1))) / h if ngrid > 1 else 1.0
        cand = np.where(d <= dmin + 2 * h * max(slope, 1.0))[0]
        # group into contiguous runs, refine each
        runs: list[tuple[int, int]] = []
        start = cand[0]
        prev = cand[0]
        for i in cand[1:]:
            if i > prev + 1:
                runs.append((start, prev))
                start = i
            prev = i
        runs.append((start, prev))
        outs: list[np.ndarray] = []
        best = np.inf
        for s, e in runs:
            tlo = np.array([max(ts[s] - h, lo)])
            thi = np.array([min(ts[e] + h, hi)])
            if poly is None:
                def phi(t, x=x):
                    return np.sum((self.gamma(t) - x[None, :]) ** 2, axis=1)
            else:
                def phi(t, x=x):
                    p = self.gamma(t)
                    val = np.sum((p - x[None, :]) ** 2, axis=1)
                    return np.where(poly.margins(p) > 1e-12, np.inf, val)
            tstar = _golden(phi, tlo, thi)
            v = phi(tstar)
            if not np.isfinite(v[0]):
                continue
            pt = self.gamma(tstar)[0]
            dd = float(np.linalg.norm(pt - x))
            if dd < best - tol:
                outs = [pt]
                best = dd
            elif dd <= best + tol:
                outs.append(pt)
                best = min(best, dd)
        return _dedup_points(outs, max(tol, 1e-12))


def _dedup_points(pts: list[np.ndarray], tol: float) -> list[np.ndarray]:
    kept: list[np.ndarray] = []
    for p in sorted(pts, key=lambda q: tuple(np.round(q, 12))):
        if all(np.linalg.norm(p - q) > tol for q in kept):
            kept.append(p)
    return kept


class Epigraph(SetDesc):
    """{(x, r) : r >= f(x)} (above=True) or {(x, r) : r <= f(x)} in R^2."""

    def __init__(self, f: ScalarFn, above: bool = True):
        self.f = f
        self.above = above
        self.dim = 2

    def key(self) -> str:
        side = "epi" if self.above else "hypo"
        return f"{side}:{self.f.name}:{len(self.f.branches)}"

    def contains_many(self, X: np.ndarray, tol: float) -> np.ndarray:
        X = _as_points(X, 2)
        vals = self.f.value_many(X[:, 0], tol)
        ok = np.isfinite(vals)
        if self.above:
            return ok & (X[:, 1] >= vals - tol)
        return ok & (X[:, 1] <= vals + tol)

    def _branch_windows(self, X: np.ndarray) -> list[tuple[float, float, object]]:
        xmid = float(np.mean(X[:, 0])) if X.size else 0.0
        wins = []
        for br in self.f.branches:
            lo = max(br.lo, xmid - WORKING_HALF_WIDTH)
            hi = min(br.hi, xmid + WORKING_HALF_WIDTH)
            if lo <= hi:
                wins.append((lo, hi, br))
        if not wins:
            raise NumericalFailure("epigraph domain misses the working window")
        return wins

    def nearest_many(self, X: np.ndarray, poly: Polyhedron | None = None):
        X = _as_points(X, 2)
        n = X.shape[0]
        bestd2 = np.full((n,), np.inf)
        bestp = np.full((n, 2), np.nan)
        for lo, hi, br in self._branch_windows(X):
            width = hi - lo
            ngrid = 2048 if width > 0 else 1
            ts = np.linspace(lo, hi, ngrid) if width > 0 else np.array([lo])

            def phi_pts(t, X=X, br=br):
                # squared distance from each query to the fiber at t,
                # respecting the polyhedral rows when present
                fv = np.asarray(br.fn(np.clip(t, br.lo, br.hi)), dtype=float)
                r = _fiber_r(t, fv, X[:, 1], self.above, poly)
                d2 = (t - X[:, 0]) ** 2 + (r - X[:, 1]) ** 2
                bad = ~np.isfinite(r)
                return np.where(bad, np.inf, d2), r

            # coarse scan: (g, n) matrices
            fv = np.asarray(br.fn(ts), dtype=float)
            R = _fiber_r(ts[:, None], fv[:, None], X[None, :, 1], self.above, poly)
            D2 = (ts[:, None] - X[None, :, 0]) ** 2 + (R - X[None, :, 1]) ** 2
            D2 = np.where(np.isfinite(R), D2, np.inf)
            order = np.argsort(D2, axis=0)[:3, :]
            h = width / max(ngrid - 1, 1)
            for k in range(order.shape[0]):
                tc = ts[order[k]]
                tlo = np.maximum(tc - 2 * h, lo)
                thi = np.minimum(tc + 2 * h, hi)

                def phi(t):
                    d2, _ = phi_pts(t)
                    return d2

                tstar = _golden(phi, tlo, thi) if width > 0 else np.full((n,), lo)
                d2s, rs = phi_pts(tstar)
                coarse = D2[order[k], np.arange(n)]
                fallback = ~np.isfinite(d2s) | (d2s > coarse)
                if np.any(fallback):
                    tstar = np.where(fallback, tc, tstar)
                    d2s, rs = phi_pts(tstar)
                better = d2s < bestd2
                bestd2 = np.where(better, d2s, bestd2)
                bestp[better, 0] = tstar[better]
                bestp[better, 1] = rs[better]
        return np.sqrt(bestd2), bestp, np.full((n,), -1, dtype=int)

    def project_all(self, x: np.ndarray, tol: float, poly: Polyhedron | None = None) -> list[np.ndarray]:
        x = np.asarray(x, dtype=float)
        # reuse the batched path on a singleton, then look for ties by a
        # dense rescan at the winning distance
        d, p, _ = self.nearest_many(x[None, :], poly=poly)
        dmin = float(d[0])
        outs = [p[0]]
        for lo, hi, br in self._branch_windows(x[None, :]):
            ngrid = 4096
            ts = np.linspace(lo, hi, ngrid)
            fv = np.asarray(br.fn(ts), dtype=float)
            r = _fiber_r(ts, fv, np.full_like(ts, x[1]), self.above, poly)
            dd = np.sqrt((ts - x[0]) ** 2 + (r - x[1]) ** 2)
            dd = np.where(np.isfinite(r), dd, np.inf)
            h = (hi - lo) / (ngrid - 1) if ngrid > 1 else 0.0
            near = np.where(dd <= dmin + max(4 * h, tol))[0]
            for i in near:
                tlo = np.array([max(ts[i] - 2 * h, lo)])
                thi = np.array([min(ts[i] + 2 * h, hi)])

                def phi(t, br=br):
                    fvv = np.asarray(br.fn(np.clip(t, br.lo, br.hi)), dtype=float)
                    rr = _fiber_r(t, fvv, np.full_like(t, x[1]), self.above, poly)
                    val = (t - x[0]) ** 2 + (rr - x[1]) ** 2
                    return np.where(np.isfinite(rr), val, np.inf)

                tstar = _golden(phi, tlo, thi)
                fvv = np.asarray(br.fn(np.clip(tstar, br.lo, br.hi)), dtype=float)
                rr = _fiber_r(tstar, fvv, np.array([x[1]]), self.above, poly)
                if not np.isfinite(rr[0]):
                    continue
                pt = np.array([tstar[0], rr[0]])
                dd2 = float(np.linalg.norm(pt - x))
                if dd2 <= dmin + tol:
                    outs.append(pt)
        return _dedup_points(outs, max(tol, 1e-9))


def _fiber_r(t, fv, r0, above: bool, poly: Polyhedron | None):
    """Best r on the fiber {(t, r) : r >=/<= fv, A(t,r) <= b} for target r0.

    Returns nan where the fiber is empty.  Inputs broadcast together.
    """
    t, fv, r0 = np.broadcast_arrays(np.asarray(t, dtype=float),
                                    np.asarray(fv, dtype=float),
                                    np.asarray(r0, dtype=float))
    if above:
        rlo = fv.astype(float).copy()
        rhi = np.full(fv.shape, np.inf)
    else:
        rlo = np.full(fv.shape, -np.inf)
        rhi = fv.astype(float).copy()
    if poly is not None:
        # rows a_t * t + a_r * r <= b
        for (at, ar), bb in zip(poly.A, poly.b):
            if abs(ar) < 1e-14:
                bad = at * t - bb > 1e-12
                rlo = np.where(bad, np.inf, rlo)
                rhi = np.where(bad, -np.inf, rhi)
            elif ar > 0:
                rhi = np.minimum(rhi, (bb - at * t) / ar)
            else:
                rlo = np.maximum(rlo, (bb - at * t) / ar)
    r = np.clip(r0, rlo, rhi)
    return np.where(rlo <= rhi + 1e-12, r, np.nan)


# ---------------------------------------------------------------------------
# combinators


class Product(SetDesc):
    """Cartesian product of parts, concatenated coordinates."""

    def __init__(self, parts: Sequence[SetDesc]):
        if not parts:
            raise InputError("empty product")
        self.parts = tuple(parts)
        self.dim = sum(p.dim for p in parts)
        self._slices = []
        off = 0
        for p in parts:
            self._slices.append(slice(off, off + p.dim))
            off += p.dim

    def key(self) -> str:
        return "prod(" + ",".join(p.key() for p in self.parts) + ")"

    def nearest_many(self, X: np.ndarray):
        X = _as_points(X, self.dim)
        P = np.empty_like(X)
        D2 = np.zeros((X.shape[0],))
        for part, sl in zip(self.parts, self._slices):
            d, p, _ = part.nearest_many(X[:, sl])
            P[:, sl] = p
            D2 += d ** 2
        return np.sqrt(D2), P, np.full((X.shape[0],), -1, dtype=int)

    def contains_many(self, X: np.ndarray, tol: float) -> np.ndarray:
        X = _as_points(X, self.dim)
        ok = np.ones((X.shape[0],), dtype=bool)
        for part, sl in zip(self.parts, self._slices):
            ok &= part.contains_many(X[:, sl], tol)
        return ok

    def project_all(self, x: np.ndarray, tol: float) -> list[np.ndarray]:
        x = np.asarray(x, dtype=float)
        per = [part.project_all(x[sl], tol) for part, sl in zip(self.parts, self._slices)]
        outs: list[np.ndarray] = []
        for combo in itertools.product(*per):
            if len(outs) > 64:
                break
            outs.append(np.concatenate(combo))
        return outs

    def as_polyhedron(self) -> Polyhedron | None:
        rows, rhs = [], []
        off = 0
        for part in self.parts:
            sub = getattr(part, "as_polyhedron", lambda: None)()
            if sub is None:
                return None
            for a, bb in zip(sub.A, sub.b):
                row = np.zeros(self.dim)
                row[off:off + part.dim] = a
                rows.append(row)
                rhs.append(bb)
            off += part.dim
        return Polyhedron(np.asarray(rows).reshape(-1, self.dim), np.asarray(rhs), dim=self.dim)


class Union(SetDesc):
    """Finite union; nearest_many reports the achieving member index."""

    def __init__(self, members: Sequence[SetDesc]):
        if not members:
            raise InputError("empty union")
        dims = {m.dim for m in members}
        if len(dims) != 1:
            raise InputError("union members must share a dimension")
        self.members = tuple(members)
        self.dim = members[0].dim

    def key(self) -> str:
        return "union(" + ",".join(m.key() for m in self.members) + ")"

    def nearest_many(self, X: np.ndarray):
        X = _as_points(X, self.dim)
        bestd = np.full((X.shape[0],), np.inf)
        bestp = np.full_like(X, np.nan)
        besti = np.full((X.shape[0],), -1, dtype=int)
        for i, m in enumerate(self.members):
            d, p, _ = m.nearest_many(X)
            better = d < bestd
            bestd = np.where(better, d, bestd)
            bestp[better] = p[better]
            besti[better] = i
        return bestd, bestp, besti

    def members_within(self, X: np.ndarray, tol: float):
        """Distances, nearest points and tie masks per member.

        Returns (D, P, ties): D is (m, n), P is (m, n, dim), ties[i, j]
        says member i achieves the least distance for query j within tol.
        """
        X = _as_points(X, self.dim)
        ds, ps = [], []
        for m in self.members:
            d, p, _ = m.nearest_many(X)
            ds.append(d)
            ps.append(p)
        D = np.stack(ds)
        P = np.stack(ps)
        dmin = np.min(D, axis=0)
        ties = D <= dmin[None, :] + tol
        return D, P, ties

    def contains_many(self, X: np.ndarray, tol: float) -> np.ndarray:
        X = _as_points(X, self.dim)
        ok = np.zeros((X.shape[0],), dtype=bool)
        for m in self.members:
            ok |= m.contains_many(X, tol)
        return ok

    def project_all(self, x: np.ndarray, tol: float) -> list[np.ndarray]:
        per = [(m.project_all(x, tol), m) for m in self.members]
        x = np.asarray(x, dtype=float)
        best = np.inf
        for pts, _ in per:
            for p in pts:
                best = min(best, float(np.linalg.norm(p - x)))
        outs = [p for pts, _ in per for p in pts
                if np.linalg.norm(p - np.asarray(x)) <= best + tol]
        return _dedup_points(outs, max(tol, 1e-12))


class CurveInPoly(SetDesc):
    """Curve restricted by polyhedral rows (canonical intersection form)."""

    def __init__(self, curve: CurveGraph, poly: Polyhedron):
        if curve.dim != poly.dim:
            raise InputError("dimension mismatch in curve restriction")
        self.curve = curve
        self.poly = poly
        self.dim = curve.dim

    def key(self) -> str:
        return f"curvein({self.curve.key()},{self.poly.key()})"

    def nearest_many(self, X: np.ndarray):
        return self.curve.nearest_many(X, poly=self.poly)

    def contains_many(self, X: np.ndarray, tol: float) -> np.ndarray:
        d, _, _ = self.nearest_many(X)
        return (d <= tol) & self.poly.contains_many(X, tol)

    def project_all(self, x: np.ndarray, tol: float) -> list[np.ndarray]:
        return self.curve.project_all(x, tol, poly=self.poly)


class EpigraphInPoly(SetDesc):
    """Epigraph/hypograph region cut by polyhedral rows, in R^2."""

    def __init__(self, epi: Epigraph, poly: Polyhedron):
        if poly.dim != 2:
            raise InputError("graph-region restriction needs a planar polyhedron")
        self.epi = epi
        self.poly = poly
        self.dim = 2

    def key(self) -> str:
        return f"epin({self.epi.key()},{self.poly.key()})"

    def nearest_many(self, X: np.ndarray):
        return self.epi.nearest_many(X, poly=self.poly)

    def contains_many(self, X: np.ndarray, tol: float) -> np.ndarray:
        return self.epi.contains_many(X, tol) & self.poly.contains_many(X, tol)

    def project_all(self, x: np.ndarray, tol: float) -> list[np.ndarray]:
        return self.epi.project_all(x, tol, poly=self.poly)


class GenericIntersection(SetDesc):
    """Fallback intersection: penalty descent from lattice seeds.

    Only reached when no structural reduction applies; raises
    NumericalFailure when the polish cannot certify membership.
    """

    def __init__(self, members: Sequence[SetDesc]):
        dims = {m.dim for m in members}
        if len(dims) != 1:
            raise InputError("intersection members must share a dimension")
        self.members = tuple(members)
        self.dim = members[0].dim

    def key(self) -> str:
        return "inter(" + ",".join(m.key() for m in self.members) + ")"

    def contains_many(self, X: np.ndarray, tol: float) -> np.ndarray:
        X = _as_points(X, self.dim)
        ok = np.ones((X.shape[0],), dtype=bool)
        for m in self.members:
            ok &= m.contains_many(X, tol)
        return ok

    def nearest_many(self, X: np.ndarray):
        X = _as_points(X, self.dim)
        out_d = np.empty((X.shape[0],))
        out_p = np.empty_like(X)
        for i, x in enumerate(X):
            p = self._project_one(x)
            out_p[i] = p
            out_d[i] = np.linalg.norm(p - x)
        return out_d, out_p, np.full((X.shape[0],), -1, dtype=int)

    def _project_one(self, x: np.ndarray) -> np.ndarray:
        from scipy import optimize

        seeds = [m.nearest_many(x[None, :])[1][0] for m in self.members]
        seeds = [s for s in seeds if np.all(np.isfinite(s))]
        if not seeds:
            raise NumericalFailure("no finite member projections to seed from")
        rad = max(float(np.linalg.norm(s - x)) for s in seeds) * 2.0 + 1e-6
        k = max(3, int(round(24 ** (1.0 / self.dim))))
        axes = [np.linspace(-rad, rad, k)] * self.dim
        lattice = x[None, :] + np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
        feas = self.contains_many(lattice, 1e-3 * (1 + rad))
        seeds.extend(lattice[feas][:32])

        def pen(u: np.ndarray) -> float:
            tot = float(np.sum((u - x) ** 2))
            for m in self.members:
                d, _, _ = m.nearest_many(u[None, :])
                tot += 1e4 * float(d[0]) ** 2
            return tot

        best, bestv = None, np.inf
        for s in seeds:
            res = optimize.minimize(pen, s, method="Nelder-Mead",
                                    options={"xatol": 1e-12, "fatol": 1e-18, "maxiter": 2000})
            u = res.x
            # snap: one projection pass over members, worst-first
            for _ in range(40):
                ds = [(float(m.nearest_many(u[None, :])[0][0]), m) for m in self.members]
                worst = max(ds, key=lambda t: t[0])
                if worst[0] <= 1e-10:
                    break
                u = worst[1].nearest_many(u[None, :])[1][0]
            ds = [float(m.nearest_many(u[None, :])[0][0]) for m in self.members]
            if max(ds) <= 1e-8:
                v = float(np.linalg.norm(u - x))
                if v < bestv:
                    best, bestv = u, v
        if best is None:
            raise NumericalFailure("intersection projection did not converge")
        return best

    def project_all(self, x: np.ndarray, tol: float) -> list[np.ndarray]:
        return [self._project_one(np.asarray(x, dtype=float))]


# ---------------------------------------------------------------------------
# canonicalizing constructors


def product_of(*parts: SetDesc) -> SetDesc:
    flat: list[SetDesc] = []
    for p in parts:
        if isinstance(p, Product):
            flat.extend(p.parts)
        else:
            flat.append(p)
    return flat[0] if len(flat) == 1 else Product(flat)


def union_of(*members: SetDesc) -> SetDesc:
    flat: list[SetDesc] = []
    for m in members:
        if isinstance(m, Union):
            flat.extend(m.members)
        else:
            flat.append(m)
    return flat[0] if len(flat) == 1 else Union(flat)


def _poly_part(m: SetDesc) -> Polyhedron | None:
    conv = getattr(m, "as_polyhedron", None)
    return conv() if conv is not None else None


def _merge_polys(polys: list[Polyhedron], dim: int) -> Polyhedron:
    if not polys:
        return Polyhedron(np.zeros((0, dim)), np.zeros((0,)), dim=dim)
    A = np.vstack([p.A for p in polys]) if any(p.A.size for p in polys) else np.zeros((0, dim))
    b = np.concatenate([p.b for p in polys]) if any(p.b.size for p in polys) else np.zeros((0,))
    return Polyhedron(A, b, dim=dim)


def intersect(*members: SetDesc) -> SetDesc:
    """Canonical intersection.

    Distributes over unions, merges every polyhedral member into one row
    system, and pairs a single curve or graph region with that system.
    Anything else falls through to the penalty-descent form.
    """
    flat: list[SetDesc] = []
    for m in members:
        if isinstance(m, (GenericIntersection,)):
            flat.extend(m.members)
        else:
            flat.append(m)
    dims = {m.dim for m in flat}
    if len(dims) != 1:
        raise InputError("intersection members must share a dimension")
    dim = dims.pop()

    for i, m in enumerate(flat):
        if isinstance(m, Union):
            rest = flat[:i] + flat[i + 1:]
            return union_of(*[intersect(piece, *rest) for piece in m.members])

    polys: list[Polyhedron] = []
    others: list[SetDesc] = []
    for m in flat:
        p = _poly_part(m)
        if p is not None:
            polys.append(p)
        elif isinstance(m, CurveInPoly):
            polys.append(m.poly)
            others.append(m.curve)
        elif isinstance(m, EpigraphInPoly):
            polys.append(m.poly)
            others.append(m.epi)
        else:
            others.append(m)
    merged = _merge_polys(polys, dim)
    if not others:
        return merged
    if len(others) == 1:
        other = others[0]
        if isinstance(other, CurveGraph):
            return CurveInPoly(other, merged) if merged.A.size else other
        if isinstance(other, Epigraph):
            return EpigraphInPoly(other, merged) if merged.A.size else other
    if merged.A.size:
        return GenericIntersection([*others, merged])
    return others[0] if len(others) == 1 else GenericIntersection(others)


# ---------------------------------------------------------------------------
# public point operations


def distance(x, S: SetDesc) -> float:
    d, _, _ = S.nearest_many(np.asarray(x, dtype=float)[None, :])
    return float(d[0])


def membership(x, S: SetDesc, cfg: ToleranceConfig) -> bool:
    return distance(x, S) <= cfg.tol_mem


def project(x, S: SetDesc, cfg: ToleranceConfig) -> list[np.ndarray]:
    pts = S.project_all(np.asarray(x, dtype=float), cfg.tol_mem)
    if not pts:
        raise NumericalFailure("projection returned no points")
    return pts


def in_inverse_projector(u, xbar, S: SetDesc, cfg: ToleranceConfig) -> bool:
    """Is xbar among the nearest points of S to u (at tol_mem)?"""
    u = np.asarray(u, dtype=float)
    xbar = np.asarray(xbar, dtype=float)
    return float(np.linalg.norm(u - xbar)) <= distance(u, S) + cfg.tol_mem


def fiber_distance(S: SetDesc, n: int, x, Y: np.ndarray,
                   cfg: ToleranceConfig) -> np.ndarray:
    """Distance from each y in Y to the fiber {y : (x, y) in S}.

    The fiber lives in the last dim - n coordinates; an empty fiber gives
    +inf.  Supports the graph descriptors whose fibers have closed form.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    Y = _as_points(np.asarray(Y, dtype=float), S.dim - n)
    k = Y.shape[0]
    if isinstance(S, Epigraph) and n == 1:
        v = float(S.f.value_many(np.array([x[0]]), cfg.tol_mem)[0])
        if not np.isfinite(v):
            return np.full(k, np.inf)
        d = (v - Y[:, 0]) if S.above else (Y[:, 0] - v)
        return np.maximum(d, 0.0)
    if isinstance(S, CurveGraph) and S.graph_fn is not None and n == 1:
        if not (S.t_lo - cfg.tol_mem <= x[0] <= S.t_hi + cfg.tol_mem):
            return np.full(k, np.inf)
        v = float(S.graph_fn.value_many(np.array([x[0]]), cfg.tol_mem)[0])
        if not np.isfinite(v):
            return np.full(k, np.inf)
        return np.abs(Y[:, 0] - v)
    if isinstance(S, Box):
        if np.any(x < S.lo[:n] - cfg.tol_mem) or np.any(x > S.hi[:n] + cfg.tol_mem):
            return np.full(k, np.inf)
        P = np.clip(Y, S.lo[n:], S.hi[n:])
        return np.linalg.norm(Y - P, axis=1)
    if isinstance(S, Polyhedron):
        Ay = S.A[:, n:]
        bb = S.b - S.A[:, :n] @ x
        ynorm = np.linalg.norm(Ay, axis=1)
        hard = ynorm <= 1e-12
        if np.any(bb[hard] < -cfg.tol_mem):
            return np.full(k, np.inf)
        soft = ~hard
        if not np.any(soft):
            return np.zeros(k)
        D, _, _ = Polyhedron(Ay[soft], bb[soft]).nearest_many(Y)
        return D
    if isinstance(S, Product):
        split = None
        for i in range(len(S.parts) + 1):
            if sum(p.dim for p in S.parts[:i]) == n:
                split = i
                break
        if split is None:
            raise InputError("product split does not align with the fiber")
        off = 0
        for p in S.parts[:split]:
            if not p.contains_many(x[None, off:off + p.dim], cfg.tol_mem)[0]:
                return np.full(k, np.inf)
            off += p.dim
        D2 = np.zeros(k)
        off = 0
        for p in S.parts[split:]:
            d, _, _ = p.nearest_many(Y[:, off:off + p.dim])
            D2 += d ** 2
            off += p.dim
        return np.sqrt(D2)
    if isinstance(S, Union):
        D = np.full(k, np.inf)
        for m in S.members:
            D = np.minimum(D, fiber_distance(m, n, x, Y, cfg))
        return D
    raise InputError(f"no fiber rule for {type(S).__name__}")


def sample_near(S: SetDesc, xbar, r: float, count: int, cfg: ToleranceConfig,
                tag: str = "") -> np.ndarray:
    """count points of S within r of xbar, by ball rejection + projection.

    The first row is always xbar itself.  Deterministic in cfg.seed.
    """
    xbar = np.asarray(xbar, dtype=float)
    rng = np.random.default_rng(stable_seed(cfg.seed, "sample_near", tag,
                                            np.round(xbar, 12), round(r, 15), count))
    picked = [xbar[None, :]]
    total = 1
    attempts = 0
    while total < count and attempts < 40:
        m = max(count, 64)
        v = rng.standard_normal((m, S.dim))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        radii = rng.random((m, 1)) ** (1.0 / S.dim)
        u = xbar[None, :] + r * radii * v
        _, p, _ = S.nearest_many(u)
        ok = np.all(np.isfinite(p), axis=1)
        p = p[ok]
        keep = np.linalg.norm(p - xbar[None, :], axis=1) <= r + cfg.tol_mem
        p = p[keep][: count - total]
        if p.size:
            picked.append(p)
            total += p.shape[0]
        attempts += 1
    return np.vstack(picked)
