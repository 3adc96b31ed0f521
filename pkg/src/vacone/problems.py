"""Problem documents: JSON descriptions of sets, functions, maps, queries.

A problem file is a single JSON object:

.. code-block:: json

    {
      "seed": 0,
      "config": {"tol_mem": 1e-9, "tol_dir": 0.035, "grid_res": 400},
      "functions": {"f": {"pieces": [
          {"interval": [-8, 0], "expr": "-x"},
          {"interval": [0, 8], "expr": "x^2", "deriv": "2*x"}]}},
      "sets": {
        "C":  {"box": {"lo": [0], "hi": ["inf"]}},
        "P":  {"polyhedron": {"A": [[1, 0]], "b": [0]}},
        "H":  {"halfplane": {"normal": [0, -1], "offset": 0}},
        "R2": {"full_space": 2},
        "G":  {"curve_graph": {"fn": "f"}},
        "E":  {"epigraph": {"fn": "f", "above": true}},
        "U":  {"union": ["P", "H"]},
        "X":  {"product": ["C", "C"]},
        "I":  {"intersection": ["P", "H"]}
      },
      "maps": {"F": {"n": 1, "m": 1, "graph": "E", "dom": "C"}},
      "queries": [{"id": "k1", "op": "limiting_normal_cone",
                   "set": "G", "body": "C", "point": [0, 0]}]
    }

Infinite bounds are spelled "inf" / "-inf".  Every query carries an
"op"; the optional "engine" picks the sampling engine ("A", "B") or the
brute-force lattice reference ("oracle") where one exists.  Reports are
serialized canonically, so identical inputs give byte-identical output.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import oracle as O
from . import sets as S_
from .coderivatives import (MultiMap, classical_coderivative_graph,
                            coderivative_graph_wrt, coderivative_wrt)
from .cones import Cone, cone_slice, make_cone
from .config import DEFAULT_CONFIG, ToleranceConfig
from .criteria import aubin_wrt, lipschitz_wrt, piecewise_screen, \
    relative_aubin, stationarity_check
from .errors import InputError
from .expressions import parse_expr
from .normals import (NormalQuery, frechet_normal_cone, limiting_normal_cone,
                      prox_normal_cone, prox_normal_member, tangent_cone)
from .scalarfn import ScalarFn
from .subdiff import profile_coderivative, subdifferentials_wrt

__all__ = ["load_problem", "build_problem", "build_function", "build_set",
           "run_report", "canonical_json", "canon_rows", "compare_result",
           "ProblemEnv", "OP_NAMES"]


def _num(v) -> float:
    if isinstance(v, str):
        if v == "inf":
            return float("inf")
        if v == "-inf":
            return float("-inf")
        raise InputError(f"bad number {v!r}; only 'inf' and '-inf' are "
                         "accepted as strings")
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise InputError(f"bad number {v!r}")
    return float(v)


def _vec(v, what: str) -> np.ndarray:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return np.array([float(v)])
    if not isinstance(v, list) or not v:
        raise InputError(f"{what} must be a number or a non-empty list")
    return np.array([_num(x) for x in v])


# ---------------------------------------------------------------------------
# construction


def load_problem(path: str) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as e:
        raise InputError(f"problem file parse error at line {e.lineno}, "
                         f"column {e.colno}: {e.msg}") from None
    if not isinstance(doc, dict):
        raise InputError("problem file must hold a JSON object")
    return doc


def build_function(name: str, spec: dict) -> ScalarFn:
    pieces = spec.get("pieces")
    if not isinstance(pieces, list) or not pieces:
        raise InputError(f"function {name!r} needs a non-empty pieces list")
    built = []
    for i, pc in enumerate(pieces):
        iv = pc.get("interval")
        if not isinstance(iv, list) or len(iv) != 2:
            raise InputError(f"function {name!r} piece {i}: interval must "
                             "be [lo, hi]")
        lo, hi = _num(iv[0]), _num(iv[1])
        if "expr" not in pc:
            raise InputError(f"function {name!r} piece {i}: missing expr")
        ast = parse_expr(pc["expr"])
        if "deriv" in pc:
            d1 = parse_expr(pc["deriv"]).fn()
        else:
            try:
                d1 = ast.diff().fn()
            except InputError:
                d1 = None
        built.append(((lo, hi), ast.fn(), d1))
    return ScalarFn.from_pieces(built, name=name)


@dataclass
class ProblemEnv:
    """Resolved problem objects, keyed by their document names."""

    functions: dict[str, ScalarFn] = field(default_factory=dict)
    sets: dict[str, S_.SetDesc] = field(default_factory=dict)
    maps: dict[str, MultiMap] = field(default_factory=dict)

    def fn(self, name) -> ScalarFn:
        if name not in self.functions:
            raise InputError(f"unknown function {name!r}")
        return self.functions[name]

    def set_(self, name) -> S_.SetDesc:
        if name not in self.sets:
            raise InputError(f"unknown set {name!r}")
        return self.sets[name]

    def map_(self, name) -> MultiMap:
        if name not in self.maps:
            raise InputError(f"unknown map {name!r}")
        return self.maps[name]


def build_set(name: str, spec: dict, env: ProblemEnv,
              all_specs: dict, stack: tuple = ()) -> S_.SetDesc:
    if name in env.sets:
        return env.sets[name]
    if name in stack:
        raise InputError(f"set definitions form a cycle through {name!r}")
    if not isinstance(spec, dict) or len(spec) != 1:
        raise InputError(f"set {name!r} must have exactly one kind key")
    (kind, body), = spec.items()

    def ref(other: str) -> S_.SetDesc:
        if other not in all_specs:
            raise InputError(f"set {name!r} references unknown set {other!r}")
        return build_set(other, all_specs[other], env, all_specs,
                         stack + (name,))

    if kind == "box":
        out = S_.Box(lo=_vec(body["lo"], f"set {name!r} lo"),
                     hi=_vec(body["hi"], f"set {name!r} hi"))
    elif kind == "polyhedron":
        out = S_.Polyhedron(A=np.array([[_num(v) for v in row] for row in body["A"]]),
                            b=_vec(body["b"], f"set {name!r} b"))
    elif kind == "halfplane":
        out = S_.halfplane(_vec(body["normal"], f"set {name!r} normal"),
                           _num(body.get("offset", 0.0)))
    elif kind == "full_space":
        out = S_.full_space(int(body))
    elif kind == "curve_graph":
        f = env.fn(body["fn"])
        lo, hi = f.dom_bounds()
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise InputError(f"set {name!r}: curve graphs need a bounded "
                             "parameter domain")
        out = S_.CurveGraph(
            lambda t, f=f: np.stack([np.asarray(t, float),
                                     f.value_many(np.asarray(t, float), 0.0)],
                                    axis=-1),
            lo, hi, 2, label=name, graph_fn=f)
    elif kind == "epigraph":
        out = S_.Epigraph(env.fn(body["fn"]), above=bool(body.get("above", True)))
    elif kind == "union":
        out = S_.union_of(*[ref(m) for m in body])
    elif kind == "product":
        out = S_.product_of(*[ref(m) for m in body])
    elif kind == "intersection":
        out = S_.intersect(*[ref(m) for m in body])
    else:
        raise InputError(f"set {name!r}: unknown kind {kind!r}")
    env.sets[name] = out
    return out


def build_problem(doc: dict) -> ProblemEnv:
    env = ProblemEnv()
    fns = doc.get("functions", {})
    if not isinstance(fns, dict):
        raise InputError("functions must be an object")
    for name, spec in fns.items():
        env.functions[name] = build_function(name, spec)
    set_specs = doc.get("sets", {})
    if not isinstance(set_specs, dict):
        raise InputError("sets must be an object")
    for name, spec in set_specs.items():
        build_set(name, spec, env, set_specs)
    for name, spec in doc.get("maps", {}).items():
        gph = env.set_(spec["graph"])
        dom = env.set_(spec["dom"]) if spec.get("dom") else None
        n, m = int(spec["n"]), int(spec["m"])
        env.maps[name] = MultiMap(n, m, gph, dom, label=name)
    return env


# ---------------------------------------------------------------------------
# canonical serialization


def _canon(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        out = float(f"{f:.12g}")
        return out if out != 0 else 0.0
    if isinstance(v, np.ndarray):
        return _canon(v.tolist())
    if isinstance(v, (list, tuple)):
        return [_canon(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _canon(x) for k, x in v.items()}
    if v is None or isinstance(v, str):
        return v
    raise InputError(f"cannot serialize a {type(v).__name__}")


def canon_rows(X) -> list[list[float]]:
    """Rows rounded and sorted lexicographically, for stable output."""
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        return []
    X = X.reshape(X.shape[0], -1)
    order = np.lexsort(np.round(X, 10).T[::-1])
    return [[_canon(v) for v in row] for row in X[order]]


def canonical_json(obj) -> str:
    return json.dumps(_canon(obj), sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# query dispatch


def _gridspec(cfg: ToleranceConfig) -> O.GridSpec:
    return O.GridSpec(resolution=int(cfg.grid_res))


def _checked_point(q: dict, dim: int, key: str = "point") -> np.ndarray:
    if key not in q:
        raise InputError(f"query {q.get('id')!r} needs {key!r}")
    x = _vec(q[key], key)
    if x.shape[0] != dim:
        raise InputError(f"query {q.get('id')!r}: {key} has dimension "
                         f"{x.shape[0]}, expected {dim}")
    return x


def _scalar_point(q: dict) -> float:
    x = _vec(q.get("point", None), "point")
    if x.shape[0] != 1:
        raise InputError(f"query {q.get('id')!r}: point must be a scalar")
    return float(x[0])


def _map_body(env: ProblemEnv, F: MultiMap, q: dict) -> S_.SetDesc | None:
    name = q.get("body")
    if name is None:
        return None
    if name == "dom":
        if F.dom is None:
            raise InputError(f"query {q.get('id')!r}: map has no domain set")
        return F.dom
    return env.set_(name)


def _cone_dict(K: Cone) -> dict:
    return {"rays": canon_rows(K.rays),
            "warnings": list(K.meta.get("warnings", ()))}


def _points_dict(P: np.ndarray) -> dict:
    return {"points": canon_rows(P), "empty": P.shape[0] == 0}


def _values_block(P: np.ndarray) -> dict:
    vals = sorted(float(v) for v in np.asarray(P, dtype=float).ravel())
    return {"values": vals,
            "span": [vals[0], vals[-1]] if vals else None,
            "empty": not vals}


def _aubin_dict(v) -> dict:
    return {"holds": bool(v.holds),
            "constant_estimate": v.constant_estimate,
            "direct_estimate": v.direct_estimate,
            "direct_by_radius": list(v.direct_by_radius),
            "zero_slice": canon_rows(v.zero_slice),
            "witness_rays": canon_rows(v.witness_rays),
            "piece_contributions": list(v.piece_contributions),
            "warnings": list(v.diagnostics)}


def _op_membership(env, q, cfg, engine):
    Sd = env.set_(q.get("set"))
    x = _checked_point(q, Sd.dim)
    if engine == "oracle":
        return {"member": bool(O.struct_contains(Sd, x[None, :], cfg.tol_mem)[0])}
    return {"member": bool(S_.membership(x, Sd, cfg))}


def _op_distance(env, q, cfg, engine):
    Sd = env.set_(q.get("set"))
    x = _checked_point(q, Sd.dim)
    if engine == "oracle":
        return {"distance": O.brute_distance(x, Sd, _gridspec(cfg))}
    return {"distance": S_.distance(x, Sd)}


def _op_project(env, q, cfg, engine):
    Sd = env.set_(q.get("set"))
    x = _checked_point(q, Sd.dim)
    if engine == "oracle":
        feet = O.brute_project(x, Sd, _gridspec(cfg))
    else:
        feet = S_.project(x, Sd, cfg)
    F = np.asarray(feet, dtype=float).reshape(len(feet), -1) if feet else \
        np.zeros((0, Sd.dim))
    return {"feet": canon_rows(F), "count": len(feet)}


def _op_prox_member(env, q, cfg, engine):
    Sd = env.set_(q.get("set"))
    body = env.set_(q["body"]) if q.get("body") else None
    x = _checked_point(q, Sd.dim)
    d = _checked_point(q, Sd.dim, key="direction")
    if engine == "oracle":
        return {"member": bool(O.brute_prox_member(d, x, Sd, body, cfg,
                                                   _gridspec(cfg)))}
    nq = NormalQuery(x, Sd, body, cfg)
    nq.validate()
    return {"member": bool(prox_normal_member(d, nq))}


def _op_prox_cone(env, q, cfg, engine):
    Sd = env.set_(q.get("set"))
    body = env.set_(q["body"]) if q.get("body") else None
    x = _checked_point(q, Sd.dim)
    if engine == "oracle":
        if Sd.dim != 2:
            raise InputError("the oracle sweeps proximal directions in the "
                             "plane only")
        ang = np.radians(np.arange(0.0, 360.0, 2.0))
        dirs = np.column_stack([np.cos(ang), np.sin(ang)])
        acc = [d for d in dirs
               if O.brute_prox_member(d, x, Sd, body, cfg, _gridspec(cfg))]
        return {"rays": canon_rows(np.asarray(acc).reshape(len(acc), 2)),
                "warnings": []}
    nq = NormalQuery(x, Sd, body, cfg)
    nq.validate()
    return _cone_dict(prox_normal_cone(nq))


def _op_limiting(env, q, cfg, engine):
    Sd = env.set_(q.get("set"))
    body = env.set_(q["body"]) if q.get("body") else None
    x = _checked_point(q, Sd.dim)
    if engine == "oracle":
        rays = O.brute_limit_cone(x, Sd, body, cfg, _gridspec(cfg))
        return {"rays": canon_rows(rays), "warnings": []}
    nq = NormalQuery(x, Sd, body, cfg)
    nq.validate()
    return _cone_dict(limiting_normal_cone(nq, engine=engine))


def _classical_only(q):
    if q.get("body") is not None:
        raise InputError(f"query {q.get('id')!r}: this cone has no body "
                         "variant; drop the body key")


def _op_frechet(env, q, cfg, engine):
    _classical_only(q)
    Sd = env.set_(q.get("set"))
    x = _checked_point(q, Sd.dim)
    return _cone_dict(frechet_normal_cone(x, Sd, cfg))


def _op_tangent(env, q, cfg, engine):
    _classical_only(q)
    Sd = env.set_(q.get("set"))
    x = _checked_point(q, Sd.dim)
    return _cone_dict(tangent_cone(x, Sd, cfg))


def _oracle_pair_cone(F: MultiMap, xb, yb, body, cfg) -> np.ndarray:
    cyl = None if body is None else S_.product_of(body, S_.full_space(F.m))
    z = np.concatenate([xb, yb])
    rays = O.brute_limit_cone(z, F.graph, cyl, cfg, _gridspec(cfg))
    if rays.shape[0] == 0:
        return np.zeros((0, F.n + F.m))
    return np.column_stack([-rays[:, F.n:], rays[:, :F.n]])


def _op_cod_pairs(env, q, cfg, engine):
    F = env.map_(q.get("map"))
    xb = _checked_point(q, F.n)
    yb = _checked_point(q, F.m, key="value")
    body = _map_body(env, F, q)
    if engine == "oracle":
        return {"rays": canon_rows(_oracle_pair_cone(F, xb, yb, body, cfg)),
                "warnings": []}
    if body is None:
        K = classical_coderivative_graph(F, xb, yb, cfg, engine=engine)
    else:
        K = coderivative_graph_wrt(F, xb, yb, body, cfg, engine=engine)
    return _cone_dict(K)


def _op_coderivative(env, q, cfg, engine):
    F = env.map_(q.get("map"))
    xb = _checked_point(q, F.n)
    yb = _checked_point(q, F.m, key="value")
    ys = _checked_point(q, F.m, key="y_star")
    body = _map_body(env, F, q)
    if engine == "oracle":
        rays = _oracle_pair_cone(F, xb, yb, body, cfg)
        K = make_cone(F.n + F.m, rays, cfg=cfg)
        return _points_dict(cone_slice(K, slice(0, F.m), ys, cfg))
    return _points_dict(coderivative_wrt(F, xb, yb, ys, body, cfg, engine=engine))


def _op_aubin(env, q, cfg, engine):
    F = env.map_(q.get("map"))
    xb = _checked_point(q, F.n)
    yb = _checked_point(q, F.m, key="value")
    body = _map_body(env, F, q)
    if body is None:
        body = S_.full_space(F.n)
    return _aubin_dict(aubin_wrt(F, xb, yb, body, cfg, engine=engine))


def _op_relative_aubin(env, q, cfg, engine):
    F = env.map_(q.get("map"))
    xb = _checked_point(q, F.n)
    yb = _checked_point(q, F.m, key="value")
    return _aubin_dict(relative_aubin(F, xb, yb, cfg, engine=engine))


def _op_lipschitz(env, q, cfg, engine):
    f = env.fn(q.get("fn"))
    body = env.set_(q.get("body"))
    x = _scalar_point(q)
    if engine == "oracle":
        lip = O.brute_lip_ratio(f, x, body, cfg, grid=_gridspec(cfg))
        return {"holds": bool(math.isfinite(lip)), "lip_estimate": lip}
    v = lipschitz_wrt(f, x, body, cfg)
    return {"holds": bool(v.holds), "lip_estimate": v.lip_estimate,
            "subdiff_bound": v.subdiff_bound,
            "ratio_by_radius": list(v.ratio_by_radius),
            "singular_rays": canon_rows(v.singular_cone.rays),
            "warnings": list(v.diagnostics)}


def _op_subdifferential(env, q, cfg, engine):
    f = env.fn(q.get("fn"))
    body = env.set_(q.get("body"))
    res = subdifferentials_wrt(f, _scalar_point(q), body, cfg)
    return {"proximal": _values_block(res.proximal),
            "limiting": _values_block(res.limiting),
            "singular_rays": canon_rows(res.singular.rays),
            "warnings": list(res.diagnostics)}


def _op_stationarity(env, q, cfg, engine):
    f = env.fn(q.get("fn"))
    body = env.set_(q.get("body"))
    rep = stationarity_check(f, _scalar_point(q), body, cfg)
    return {"holds": bool(rep.holds), "p": rep.p, "delta": rep.delta,
            "violator": None if rep.violator is None else
            [float(v) for v in rep.violator]}


def _op_screen(env, q, cfg, engine):
    f = env.fn(q.get("fn"))
    names = q.get("bodies")
    if not isinstance(names, list) or not names:
        raise InputError(f"query {q.get('id')!r} needs a bodies list")
    pieces = [env.set_(nm) for nm in names]
    v = piecewise_screen(f, _scalar_point(q), pieces, cfg)
    return {"minimizer_ruled_out": bool(v.minimizer_ruled_out),
            "failing": list(v.failing),
            "holds_per_piece": [bool(r.holds) for r in v.reports]}


def _op_profile(env, q, cfg, engine):
    f = env.fn(q.get("fn"))
    body = env.set_(q.get("body"))
    if "lam" not in q:
        raise InputError(f"query {q.get('id')!r} needs lam")
    res = profile_coderivative(f, _scalar_point(q), body, _num(q["lam"]),
                               cfg, engine=engine)
    if isinstance(res, Cone):
        return {"kind": "cone", "rays": canon_rows(res.rays)}
    out = _points_dict(res)
    out["kind"] = "points"
    return out


_AB = frozenset({"A", "B"})
_B = frozenset({"B"})
_BO = frozenset({"B", "oracle"})
_ABO = frozenset({"A", "B", "oracle"})

_OPS: dict[str, tuple] = {
    "membership": (_op_membership, _BO),
    "distance": (_op_distance, _BO),
    "project": (_op_project, _BO),
    "prox_normal_member": (_op_prox_member, _BO),
    "prox_normal_cone": (_op_prox_cone, _BO),
    "limiting_normal_cone": (_op_limiting, _ABO),
    "frechet_normal_cone": (_op_frechet, _B),
    "tangent_cone": (_op_tangent, _B),
    "coderivative_pairs": (_op_cod_pairs, _ABO),
    "coderivative": (_op_coderivative, _ABO),
    "aubin": (_op_aubin, _AB),
    "relative_aubin": (_op_relative_aubin, _AB),
    "lipschitz": (_op_lipschitz, _BO),
    "subdifferential": (_op_subdifferential, _B),
    "stationarity": (_op_stationarity, _B),
    "piecewise_screen": (_op_screen, _B),
    "profile_coderivative": (_op_profile, _AB),
}

OP_NAMES = tuple(sorted(_OPS))


def run_query(env: ProblemEnv, q: dict, cfg: ToleranceConfig,
              engine: str) -> dict:
    op = q.get("op")
    if op not in _OPS:
        raise InputError(f"unknown op {op!r}; choose from {list(OP_NAMES)}")
    handler, allowed = _OPS[op]
    if engine not in allowed:
        raise InputError(f"op {op!r} supports engines {sorted(allowed)}, "
                         f"not {engine!r}")
    return handler(env, q, cfg, engine)


def run_report(doc: dict, cfg: ToleranceConfig,
               engine_override: str | None = None,
               only: set[str] | None = None) -> dict:
    """Run a problem document's queries and assemble the report object."""
    env = build_problem(doc)
    queries = doc.get("queries", [])
    if not isinstance(queries, list):
        raise InputError("queries must be a list")
    seen: set[str] = set()
    rows = []
    for i, q in enumerate(queries):
        qid = str(q.get("id", f"q{i}"))
        if qid in seen:
            raise InputError(f"duplicate query id {qid!r}")
        seen.add(qid)
        if only is not None and qid not in only:
            continue
        engine = engine_override or q.get("engine") or "B"
        rows.append({"id": qid, "op": q.get("op"), "engine": engine,
                     "result": run_query(env, q, cfg, engine)})
    if only is not None and len(rows) < len(only):
        missing = sorted(only - {r["id"] for r in rows})
        raise InputError(f"unknown query ids {missing}")
    return {"tool": "vacone", "version": __version__, "seed": cfg.seed,
            "config": {"tol_mem": cfg.tol_mem, "tol_dir": cfg.tol_dir,
                       "grid_res": cfg.grid_res},
            "queries": rows}


# ---------------------------------------------------------------------------
# expectation matching


_RAY_KEYS = {"rays", "singular_rays", "zero_slice", "witness_rays"}
_POINT_KEYS = {"points", "feet", "values"}
_NUM_TOL = 0.02


def _unit_rows(X) -> np.ndarray:
    X = np.asarray([[_restore(v) for v in row] for row in X], dtype=float)
    if X.size == 0:
        return np.zeros((0, 1))
    X = X.reshape(X.shape[0], -1)
    n = np.linalg.norm(X, axis=1)
    X = X[n > 1e-12]
    return X / np.linalg.norm(X, axis=1, keepdims=True) if X.shape[0] else X


def _restore(v):
    if v == "inf":
        return float("inf")
    if v == "-inf":
        return float("-inf")
    if v == "nan":
        return float("nan")
    return float(v)


def _ang_gap(A: np.ndarray, B: np.ndarray) -> float:
    """Symmetric Hausdorff angle between two unit-ray families."""
    if A.shape[0] == 0 and B.shape[0] == 0:
        return 0.0
    if A.shape[0] == 0 or B.shape[0] == 0:
        return float("inf")
    cosm = np.clip(A @ B.T, -1.0, 1.0)
    d1 = float(np.max(np.arccos(np.max(cosm, axis=1))))
    d2 = float(np.max(np.arccos(np.max(cosm, axis=0))))
    return max(d1, d2)


def _pt_gap(A: np.ndarray, B: np.ndarray) -> float:
    if A.shape[0] == 0 and B.shape[0] == 0:
        return 0.0
    if A.shape[0] == 0 or B.shape[0] == 0:
        return float("inf")
    D = np.linalg.norm(A[:, None, :] - B[None, :, :], axis=2)
    return max(float(np.max(np.min(D, axis=1))), float(np.max(np.min(D, axis=0))))


def _rows_of(v) -> np.ndarray:
    X = np.asarray([[_restore(x) for x in (row if isinstance(row, list) else [row])]
                    for row in v], dtype=float)
    return X.reshape(X.shape[0], -1) if X.size else np.zeros((0, 1))


def _match_value(key: str, got, want, tol_map: dict, cfg: ToleranceConfig,
                 path: str, fails: list[str], warns: list[str]) -> None:
    if key in _RAY_KEYS and isinstance(want, list):
        A, B = _unit_rows(got), _unit_rows(want)
        base = 2.0 * cfg.tol_dir
        gap = _ang_gap(A, B)
        if gap <= base:
            return
        loose = tol_map.get(key)
        if loose is not None and gap <= float(loose):
            warns.append(f"{path}: matched only at the recorded tolerance "
                         f"({gap:.4f} rad)")
            return
        fails.append(f"{path}: ray families differ by {gap:.4f} rad "
                     f"(allowed {base:.4f})")
        return
    if key in _POINT_KEYS and isinstance(want, list):
        A, B = _rows_of(got), _rows_of(want)
        tol = float(tol_map.get(key, _NUM_TOL))
        gap = _pt_gap(A, B)
        if gap > tol:
            fails.append(f"{path}: point sets differ by {gap:.4g} "
                         f"(allowed {tol:.4g})")
        return
    if isinstance(want, dict):
        if not isinstance(got, dict):
            fails.append(f"{path}: expected an object")
            return
        for k, wv in want.items():
            if k not in got:
                fails.append(f"{path}.{k}: missing from the result")
                continue
            _match_value(k, got[k], wv, tol_map, cfg, f"{path}.{k}",
                         fails, warns)
        return
    if isinstance(want, bool):
        if bool(got) is not want:
            fails.append(f"{path}: got {got!r}, expected {want!r}")
        return
    if isinstance(want, (int, float)) or want in ("inf", "-inf", "nan"):
        w, g = _restore(want), _restore(got)
        tol = float(tol_map.get(key, _NUM_TOL))
        if math.isinf(w) or math.isinf(g):
            if w != g:
                fails.append(f"{path}: got {got!r}, expected {want!r}")
            return
        if abs(w - g) > tol:
            fails.append(f"{path}: got {g:.6g}, expected {w:.6g} "
                         f"within {tol:.4g}")
        return
    if isinstance(want, list):
        # exact structural compare (index lists, spans of two numbers)
        try:
            same = len(want) == len(got) and all(
                abs(_restore(a) - _restore(b)) <= float(tol_map.get(key, _NUM_TOL))
                for a, b in zip(got, want))
        except (TypeError, ValueError):
            same = got == want
        if not same:
            fails.append(f"{path}: got {got!r}, expected {want!r}")
        return
    if want is None:
        if got is not None:
            fails.append(f"{path}: got {got!r}, expected null")
        return
    if got != want:
        fails.append(f"{path}: got {got!r}, expected {want!r}")


def compare_result(result: dict, entry: dict, cfg: ToleranceConfig,
                   path: str = "") -> tuple[bool, list[str], list[str]]:
    """Check a query result against an expectations entry.

    Returns (ok, failures, warnings).  Ray-valued keys compare as angular
    Hausdorff distance at twice the running direction tolerance, falling
    back to the entry's recorded tolerance with a warning; point-valued
    keys use Euclidean Hausdorff distance; scalars allow the entry's
    per-key tolerance and booleans must match exactly.
    """
    fails: list[str] = []
    warns: list[str] = []
    tol_map = entry.get("tol", {})
    for k, wv in entry.get("expect", {}).items():
        if k not in result:
            fails.append(f"{path}{k}: missing from the result")
            continue
        _match_value(k, result[k], wv, tol_map, cfg, f"{path}{k}",
                     fails, warns)
    for k, n in entry.get("atleast", {}).items():
        if len(result.get(k, ())) < int(n):
            fails.append(f"{path}{k}: expected at least {n} entries, got "
                         f"{len(result.get(k, ()))}")
    return not fails, fails, warns
