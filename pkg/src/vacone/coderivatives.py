"""Coderivatives of set-valued maps through normal cones of their graphs.

A map F: R^n => R^m is described by its graph set in R^{n+m}.  The
coderivative at (x̄, ȳ) sends y* to the x* with (x*, -y*) normal to the
graph; restricting by a body C in the x-space uses the cylinder C x R^m.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import ToleranceConfig
from .errors import InputError
from . import sets as S_
from .cones import Cone, cone_slice, make_cone
from .normals import NormalQuery, limiting_normal_cone


@dataclass(eq=False)
class MultiMap:
    """Set-valued map R^n => R^m given by its graph, with optional domain."""

    n: int
    m: int
    graph: S_.SetDesc
    dom: S_.SetDesc | None = None
    label: str = ""

    def __post_init__(self):
        if self.graph.dim != self.n + self.m:
            raise InputError("graph dimension must be n + m")
        if self.dom is not None and self.dom.dim != self.n:
            raise InputError("domain must live in the source space")

    def base_pair(self, xbar, ybar, cfg: ToleranceConfig) -> np.ndarray:
        z = np.concatenate([np.atleast_1d(np.asarray(xbar, dtype=float)),
                            np.atleast_1d(np.asarray(ybar, dtype=float))])
        if z.shape[0] != self.n + self.m:
            raise InputError("base pair dimension mismatch")
        if not S_.membership(z, self.graph, cfg):
            raise InputError("base pair not on the graph")
        return z


def _cylinder(body_x: S_.SetDesc, m: int) -> S_.SetDesc:
    return S_.product_of(body_x, S_.full_space(m))


def _swap_to_pairs(K: Cone, n: int, m: int, cfg: ToleranceConfig) -> Cone:
    """Normal rays (x*, -y*) in R^{n+m} -> coderivative pairs (y*, x*)."""
    rays = K.rays
    out = np.empty((rays.shape[0], m + n))
    out[:, :m] = -rays[:, n:]
    out[:, m:] = rays[:, :n]
    meta = dict(K.meta)
    meta["kind"] = "coderivative-graph"
    return make_cone(m + n, out, cfg=cfg, meta=meta)


def coderivative_graph_wrt(F: MultiMap, xbar, ybar, body_x: S_.SetDesc | None,
                           cfg: ToleranceConfig, engine: str = "B") -> Cone:
    """Cone of coderivative pairs (y*, x*) at (x̄, ȳ), body acting in x."""
    z = F.base_pair(xbar, ybar, cfg)
    body = None if body_x is None else _cylinder(body_x, F.m)
    q = NormalQuery(z, F.graph, body, cfg)
    q.validate()
    K = limiting_normal_cone(q, engine=engine)
    return _swap_to_pairs(K, F.n, F.m, cfg)


def relative_coderivative(F: MultiMap, xbar, ybar, cfg: ToleranceConfig,
                          engine: str = "B") -> Cone:
    """Coderivative graph-cone taken with respect to the map's own domain."""
    if F.dom is None:
        raise InputError("relative coderivative needs the domain set")
    return coderivative_graph_wrt(F, xbar, ybar, F.dom, cfg, engine=engine)


def classical_coderivative_graph(F: MultiMap, xbar, ybar, cfg: ToleranceConfig,
                                 engine: str = "B") -> Cone:
    return coderivative_graph_wrt(F, xbar, ybar, None, cfg, engine=engine)


def coderivative_wrt(F: MultiMap, xbar, ybar, y_star, body_x: S_.SetDesc | None,
                     cfg: ToleranceConfig, engine: str = "B") -> np.ndarray:
    """Value set D*F(x̄,ȳ)(y*): x* rows from slicing the pair cone at y*."""
    y_star = np.atleast_1d(np.asarray(y_star, dtype=float))
    if y_star.shape[0] != F.m:
        raise InputError("y* dimension mismatch")
    Kp = coderivative_graph_wrt(F, xbar, ybar, body_x, cfg, engine=engine)
    return cone_slice(Kp, slice(0, F.m), y_star, cfg)


def lcp_graph_fixture() -> MultiMap:
    """Solution map of the complementarity system with M = [[-1,0],[1,1]].

    F(x,y) = {(u,v) >= 0 : M(u,v) + (x,y) >= 0, <(u,v), M(u,v)+(x,y)> = 0}.
    The graph in R^4 splits into nine polyhedral pieces indexed by which of
    the two complementarity pairs has w_i = 0, (Mw+z)_i = 0, or both active;
    strict inequalities are closed, so pieces overlap on shared faces.
    """
    # coordinates (x, y, u, v); Mw + z = (x - u, u + v + y)
    base = [
        [-1.0, 0.0, 0.0, 0.0],   # x >= 0
        [0.0, 0.0, -1.0, 0.0],   # u >= 0
        [0.0, 0.0, 0.0, -1.0],   # v >= 0
        [-1.0, 0.0, 1.0, 0.0],   # x - u >= 0
        [0.0, -1.0, -1.0, -1.0],  # y + u + v >= 0
    ]
    first = {
        "w0": [[0.0, 0.0, 1.0, 0.0]],                        # u <= 0
        "r0": [[1.0, 0.0, -1.0, 0.0]],                       # x - u <= 0
        "both": [[0.0, 0.0, 1.0, 0.0], [1.0, 0.0, -1.0, 0.0]],
    }
    second = {
        "w0": [[0.0, 0.0, 0.0, 1.0]],                        # v <= 0
        "r0": [[0.0, 1.0, 1.0, 1.0]],                        # y + u + v <= 0
        "both": [[0.0, 0.0, 0.0, 1.0], [0.0, 1.0, 1.0, 1.0]],
    }
    pieces = []
    for k1 in ("w0", "r0", "both"):
        for k2 in ("w0", "r0", "both"):
            A = np.asarray(base + first[k1] + second[k2])
            pieces.append(S_.Polyhedron(A, np.zeros(A.shape[0])))
    dom = S_.Box(lo=np.array([0.0, -np.inf]), hi=np.array([np.inf, np.inf]))
    return MultiMap(2, 2, S_.Union(pieces), dom, label="lcp")
