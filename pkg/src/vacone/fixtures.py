"""Built-in worked fixtures and the expectations they are checked against.

Each fixture is expressed as a problem dictionary (the same schema the
problem-file loader accepts), so the bundled suite exercises the whole
pipeline: expression parsing, set construction, query dispatch, report
serialization.  ``materialize_expectations`` recomputes every expected
value, using the brute-force oracles where one exists and closed-form
values otherwise, and is the sole source of the checked-in expectations
document.
"""

from __future__ import annotations

import json
import math

import numpy as np

from . import oracle as O
from . import sets as S_
from .config import DEFAULT_CONFIG, ToleranceConfig
from .coderivatives import lcp_graph_fixture
from .scalarfn import ScalarFn

__all__ = ["BUILTIN_PROBLEMS", "builtin_problem", "materialize_expectations",
           "write_expectations", "sigmoid", "EXPECTATIONS_VERSION"]

EXPECTATIONS_VERSION = 1

_R2 = 0.7071067811865476  # sqrt(1/2)


def sigmoid(lo: float = 0.0, hi: float = 8.0, name: str = "s") -> ScalarFn:
    """Shifted sigmoid with slope exactly 1 at the origin."""
    return ScalarFn.smooth(
        lambda t: 2.0 / (1.0 + np.exp(-2.0 * t)) - 1.0,
        d1=lambda t: 4.0 * np.exp(-2.0 * t) / (1.0 + np.exp(-2.0 * t)) ** 2,
        lo=lo, hi=hi, name=name)


_SIGMOID_EXPR = "2/(1+exp(-2*x))-1"


# ---------------------------------------------------------------------------
# problem dictionaries


def _problem_exam0() -> dict:
    """Half-curve with an endpoint at the origin, inspected inside R+ x R."""
    return {
        "functions": {"s": {"pieces": [{"interval": [0, 8], "expr": _SIGMOID_EXPR}]}},
        "sets": {
            "omega0": {"curve_graph": {"fn": "s"}},
            "C": {"box": {"lo": [0, "-inf"], "hi": ["inf", "inf"]}},
        },
        "queries": [
            {"id": "limiting_wrt", "op": "limiting_normal_cone",
             "set": "omega0", "body": "C", "point": [0, 0]},
            {"id": "classical", "op": "limiting_normal_cone",
             "set": "omega0", "point": [0, 0]},
            {"id": "prox_wrt", "op": "prox_normal_cone",
             "set": "omega0", "body": "C", "point": [0, 0]},
            {"id": "wedge_member", "op": "prox_normal_member",
             "set": "omega0", "body": "C", "point": [0, 0], "direction": [0, -1]},
            {"id": "ray_not_prox", "op": "prox_normal_member",
             "set": "omega0", "body": "C", "point": [0, 0],
             "direction": [-_R2, _R2]},
            {"id": "tangent", "op": "tangent_cone", "set": "omega0", "point": [0, 0]},
            {"id": "frechet", "op": "frechet_normal_cone",
             "set": "omega0", "point": [0, 0]},
        ],
    }


def _problem_exam1() -> dict:
    """Sigmoid hypograph map: one mixed coderivative ray, Aubin constant 1."""
    return {
        "functions": {"s": {"pieces": [{"interval": [0, 8], "expr": _SIGMOID_EXPR}]}},
        "sets": {
            "gphF1": {"epigraph": {"fn": "s", "above": False}},
            "C1": {"box": {"lo": [0], "hi": ["inf"]}},
        },
        "maps": {"F1": {"n": 1, "m": 1, "graph": "gphF1", "dom": "C1"}},
        "queries": [
            {"id": "pair_cone", "op": "coderivative_pairs",
             "map": "F1", "point": [0], "value": [0], "body": "dom"},
            {"id": "classical_pairs", "op": "coderivative_pairs",
             "map": "F1", "point": [0], "value": [0]},
            {"id": "aubin", "op": "relative_aubin",
             "map": "F1", "point": [0], "value": [0]},
            {"id": "slice_neg", "op": "coderivative",
             "map": "F1", "point": [0], "value": [0], "body": "dom",
             "y_star": [-1]},
            {"id": "slice_zero", "op": "coderivative",
             "map": "F1", "point": [0], "value": [0], "body": "dom",
             "y_star": [0]},
            {"id": "slice_pos", "op": "coderivative",
             "map": "F1", "point": [0], "value": [0], "body": "dom",
             "y_star": [1]},
        ],
    }


def _problem_exam2() -> dict:
    """Complementarity solution map, serialized piece by piece."""
    F = lcp_graph_fixture()
    sets: dict[str, dict] = {}
    names = []
    for i, piece in enumerate(F.graph.members):
        nm = f"piece{i}"
        sets[nm] = {"polyhedron": {"A": piece.A.tolist(), "b": piece.b.tolist()}}
        names.append(nm)
    sets["gphF"] = {"union": names}
    sets["domF"] = {"box": {"lo": [0, "-inf"], "hi": ["inf", "inf"]}}
    return {
        "sets": sets,
        "maps": {"F": {"n": 2, "m": 2, "graph": "gphF", "dom": "domF"}},
        "queries": [
            {"id": "aubin", "op": "relative_aubin",
             "map": "F", "point": [0, 0], "value": [0, 0]},
        ],
    }


def _problem_remark3() -> dict:
    """Set-valued indicator of R+: relative Aubin holds, classical fails."""
    return {
        "sets": {
            "R08": {"box": {"lo": [0], "hi": [8]}},
            "zero1": {"box": {"lo": [0], "hi": [0]}},
            "gphD": {"product": ["R08", "zero1"]},
        },
        "maps": {"D": {"n": 1, "m": 1, "graph": "gphD", "dom": "R08"}},
        "queries": [
            {"id": "relative", "op": "relative_aubin",
             "map": "D", "point": [0], "value": [0]},
            {"id": "classical", "op": "aubin",
             "map": "D", "point": [0], "value": [0]},
        ],
    }


_SEC5_FUNCTIONS = {
    "f2": {"pieces": [{"interval": [-8, 0], "expr": "x"},
                      {"interval": [0, 8], "expr": "x^2"}]},
    "f3": {"pieces": [{"interval": [0, 8], "expr": "-x"}]},
    "fabs": {"pieces": [{"interval": [-8, 0], "expr": "-x"},
                        {"interval": [0, 8], "expr": "x"}]},
    "fsqrt": {"pieces": [{"interval": [0, 8], "expr": "sqrt(x)",
                          "deriv": "1/(2*sqrt(max(x,1e-300)))"}]},
    "find": {"pieces": [{"interval": [0, 8], "expr": "0"}]},
}

_SEC5_SETS = {
    "C1": {"box": {"lo": [0], "hi": ["inf"]}},
    "C2": {"box": {"lo": ["-inf"], "hi": [0]}},
    "R1": {"full_space": 1},
}


def _problem_sec5() -> dict:
    """Scalar suite: subdifferentials, screens, Lipschitz verdicts."""
    return {
        "functions": dict(_SEC5_FUNCTIONS),
        "sets": dict(_SEC5_SETS),
        "queries": [
            {"id": "subdiff_f2_C1", "op": "subdifferential",
             "fn": "f2", "point": 0, "body": "C1"},
            {"id": "subdiff_f2_C2", "op": "subdifferential",
             "fn": "f2", "point": 0, "body": "C2"},
            {"id": "subdiff_f3_C1", "op": "subdifferential",
             "fn": "f3", "point": 0, "body": "C1"},
            {"id": "subdiff_abs_R", "op": "subdifferential",
             "fn": "fabs", "point": 0, "body": "R1"},
            {"id": "screen_f2", "op": "piecewise_screen",
             "fn": "f2", "point": 0, "bodies": ["C1", "C2"]},
            {"id": "stat_f2_C1", "op": "stationarity",
             "fn": "f2", "point": 0, "body": "C1"},
            {"id": "stat_f3_C1", "op": "stationarity",
             "fn": "f3", "point": 0, "body": "C1"},
            {"id": "lip_ind", "op": "lipschitz", "fn": "find", "point": 0, "body": "C1"},
            {"id": "lip_abs", "op": "lipschitz", "fn": "fabs", "point": 0, "body": "R1"},
            {"id": "lip_sqrt", "op": "lipschitz", "fn": "fsqrt", "point": 0, "body": "C1"},
        ],
    }


def _problem_profile() -> dict:
    """Profile-map coderivative against the subdifferential ladder."""
    lam_tags = [("2", 2.0), ("1", 1.0), ("half", 0.5), ("0", 0.0), ("m1", -1.0)]
    cases = [("f2", "C1"), ("f2", "C2"), ("f3", "C1"), ("find", "C1")]
    queries = []
    for fn, body in cases:
        for tag, lam in lam_tags:
            queries.append({"id": f"{fn}_{body}_lam{tag}", "op": "profile_coderivative",
                            "fn": fn, "point": 0, "body": body, "lam": lam})
    return {
        "functions": {k: dict(_SEC5_FUNCTIONS[k]) for k in ("f2", "f3", "find")},
        "sets": dict(_SEC5_SETS),
        "queries": queries,
    }


BUILTIN_PROBLEMS: dict[str, object] = {
    "exam0": _problem_exam0,
    "exam1": _problem_exam1,
    "exam2": _problem_exam2,
    "remark3": _problem_remark3,
    "sec5": _problem_sec5,
    "profile": _problem_profile,
}


def builtin_problem(name: str) -> dict:
    from .errors import InputError

    if name not in BUILTIN_PROBLEMS:
        raise InputError(f"unknown built-in problem {name!r}; "
                         f"choose from {sorted(BUILTIN_PROBLEMS)}")
    return BUILTIN_PROBLEMS[name]()


# ---------------------------------------------------------------------------
# expectations


def _rows(rays: np.ndarray) -> list[list[float]]:
    rays = np.asarray(rays, dtype=float).reshape(-1, rays.shape[-1] if rays.size else 1)
    order = np.lexsort(np.round(rays, 10).T[::-1])
    return [[float(f"{v:.12g}") for v in row] for row in rays[order]]


def _wedge_rays(deg_lo: float, deg_hi: float, step: float = 3.0) -> list[list[float]]:
    n = int(round((deg_hi - deg_lo) / step)) + 1
    ang = np.radians(np.linspace(deg_lo, deg_hi, n))
    return _rows(np.column_stack([np.cos(ang), np.sin(ang)]))


def _exam0_objects():
    s = sigmoid()
    curve = S_.CurveGraph(
        lambda t: np.stack([np.asarray(t, float),
                            s.value_many(np.asarray(t, float), 0.0)], axis=-1),
        0.0, 8.0, 2, label="omega0", graph_fn=s)
    C = S_.Box(lo=np.array([0.0, -np.inf]), hi=np.array([np.inf, np.inf]))
    return curve, C


def materialize_expectations(cfg: ToleranceConfig = DEFAULT_CONFIG) -> dict:
    """Recompute the full expectations table.

    Entries carry the value, the comparison tolerances the suite should
    apply, and the derivation route: "oracle" entries come out of the
    brute-force lattice reference, "analytic" entries are closed forms.
    """
    x0 = np.zeros(2)
    curve, C = _exam0_objects()
    ent: dict[str, dict] = {}

    rel = O.brute_limit_cone(x0, curve, C, cfg)
    cls = O.brute_limit_cone(x0, curve, None, cfg)
    ent["exam0/limiting_wrt"] = {"expect": {"rays": _rows(rel)}, "source": "oracle"}
    ent["exam0/classical"] = {"expect": {"rays": _rows(cls)}, "source": "oracle"}

    # prox cone by direction sweep of the defining inequality
    ang = np.radians(np.arange(0.0, 360.0, 3.0))
    dirs = np.column_stack([np.cos(ang), np.sin(ang)])
    acc = [d for d in dirs if O.brute_prox_member(d, x0, curve, C, cfg)]
    ent["exam0/prox_wrt"] = {"expect": {"rays": _rows(np.asarray(acc))},
                             "source": "oracle"}
    ent["exam0/wedge_member"] = {
        "expect": {"member": bool(O.brute_prox_member([0.0, -1.0], x0, curve, C, cfg))},
        "source": "oracle"}
    ent["exam0/ray_not_prox"] = {
        "expect": {"member": bool(O.brute_prox_member([-_R2, _R2], x0, curve, C, cfg))},
        "source": "oracle"}
    ent["exam0/tangent"] = {"expect": {"rays": [[_R2, _R2]]}, "source": "analytic"}
    ent["exam0/frechet"] = {"expect": {"rays": _wedge_rays(135.0, 315.0)},
                            "source": "analytic"}

    gph = S_.Epigraph(sigmoid(), above=False)
    cls_pairs = O.brute_limit_cone(x0, gph, None, cfg)
    swapped = np.column_stack([-cls_pairs[:, 1], cls_pairs[:, 0]])
    ent["exam1/pair_cone"] = {"expect": {"rays": [[-_R2, -_R2]]}, "source": "analytic"}
    ent["exam1/classical_pairs"] = {
        "expect": {"rays": _rows(swapped)}, "source": "oracle",
        "note": "pairs follow (y*, x*) = (-b, a) for graph normals (a, b); "
                "mirrored orientations of the same wedge appear in other "
                "conventions"}
    ent["exam1/aubin"] = {
        "expect": {"holds": True, "constant_estimate": 1.0, "direct_estimate": 1.0},
        "tol": {"constant_estimate": 0.1, "direct_estimate": 0.1},
        "source": "analytic"}
    ent["exam1/slice_neg"] = {"expect": {"points": [[-1.0]], "empty": False},
                              "source": "analytic"}
    ent["exam1/slice_zero"] = {"expect": {"points": [[0.0]], "empty": False},
                               "source": "analytic"}
    ent["exam1/slice_pos"] = {"expect": {"points": [], "empty": True},
                              "source": "analytic"}

    ent["exam2/aubin"] = {
        "expect": {"holds": True, "zero_slice": [[0.0, 0.0]],
                   "constant_estimate": 1.618, "direct_estimate": 1.618},
        "tol": {"constant_estimate": 0.05, "direct_estimate": 0.05},
        "atleast": {"piece_contributions": 5},
        "source": "analytic",
        "note": "constant is the golden ratio; dual ray ratios and primal "
                "fiber sampling agree on it"}

    ent["remark3/relative"] = {
        "expect": {"holds": True, "constant_estimate": 0.0, "direct_estimate": 0.0},
        "source": "analytic"}
    ent["remark3/classical"] = {"expect": {"holds": False}, "source": "analytic"}

    ent["sec5/subdiff_f2_C1"] = {
        "expect": {"proximal": {"span": [0.0, 0.0], "empty": False},
                   "limiting": {"span": [0.0, 0.0], "empty": False},
                   "singular_rays": []},
        "source": "analytic"}
    ent["sec5/subdiff_f2_C2"] = {
        "expect": {"proximal": {"empty": True},
                   "limiting": {"span": [1.0, 1.0], "empty": False},
                   "singular_rays": []},
        "source": "analytic"}
    ent["sec5/subdiff_f3_C1"] = {
        "expect": {"proximal": {"empty": True},
                   "limiting": {"span": [-1.0, -1.0], "empty": False},
                   "singular_rays": []},
        "source": "analytic"}
    ent["sec5/subdiff_abs_R"] = {
        "expect": {"proximal": {"span": [-1.0, 1.0], "empty": False},
                   "limiting": {"span": [-1.0, 1.0], "empty": False},
                   "singular_rays": []},
        "source": "analytic"}
    ent["sec5/screen_f2"] = {
        "expect": {"minimizer_ruled_out": True, "failing": [1]},
        "source": "analytic"}
    ent["sec5/stat_f2_C1"] = {"expect": {"holds": True}, "source": "analytic"}
    ent["sec5/stat_f3_C1"] = {"expect": {"holds": False}, "source": "analytic"}
    lip_abs = O.brute_lip_ratio(_scalar("fabs"), 0.0, S_.full_space(1), cfg)
    lip_ind = O.brute_lip_ratio(_scalar("find"), 0.0,
                                S_.Box(lo=[0.0], hi=[np.inf]), cfg)
    lip_sqrt = O.brute_lip_ratio(_scalar("fsqrt"), 0.0,
                                 S_.Box(lo=[0.0], hi=[np.inf]), cfg)
    ent["sec5/lip_ind"] = {
        "expect": {"holds": True, "lip_estimate": float(lip_ind)},
        "tol": {"lip_estimate": 0.02}, "source": "oracle"}
    ent["sec5/lip_abs"] = {
        "expect": {"holds": True, "lip_estimate": float(lip_abs)},
        "tol": {"lip_estimate": 0.05}, "source": "oracle"}
    ent["sec5/lip_sqrt"] = {
        "expect": {"holds": False, "lip_estimate": "inf" if math.isinf(lip_sqrt) else lip_sqrt},
        "source": "oracle"}

    sub_vals = {"f2_C1": 0.0, "f2_C2": 1.0, "f3_C1": -1.0, "find_C1": 0.0}
    for key, v in sub_vals.items():
        fn, body = key.split("_")
        for tag, lam in [("2", 2.0), ("1", 1.0), ("half", 0.5)]:
            ent[f"profile/{fn}_{body}_lam{tag}"] = {
                "expect": {"kind": "points", "points": [[lam * v]], "empty": False},
                "source": "analytic"}
        ent[f"profile/{fn}_{body}_lam0"] = {
            "expect": {"kind": "cone", "rays": []}, "source": "analytic"}
        ent[f"profile/{fn}_{body}_lamm1"] = {
            "expect": {"kind": "points", "points": [], "empty": True},
            "source": "analytic"}

    return {"version": EXPECTATIONS_VERSION, "entries": ent}


def _scalar(name: str) -> ScalarFn:
    from .problems import build_function

    return build_function(name, _SEC5_FUNCTIONS[name])


def write_expectations(path: str, cfg: ToleranceConfig = DEFAULT_CONFIG) -> None:
    doc = materialize_expectations(cfg)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
