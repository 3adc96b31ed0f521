"""Command line front end.

Three subcommands:

``vacone run problem.json``
    Run a problem file's queries and print (or write) the canonical
    JSON report.

``vacone paper-suite``
    Run the bundled worked problems and check every query against the
    packaged expectations document.  Exits 2 on any mismatch.

``vacone plot problem.json --query ID``
    Re-run one cone-valued plane query and write an SVG figure of the
    set, the body and the computed rays.

Exit codes: 0 success, 1 malformed input or internal failure, 2 a
requested verdict or expectation did not hold.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources

from .config import DEFAULT_CONFIG, ToleranceConfig
from .errors import InputError, NumericalFailure

_SEED_ENV = "VACONE_SEED"
_SUITE_ORDER = ("exam0", "exam1", "exam2", "remark3", "sec5", "profile")
_PLOT_OPS = {"prox_normal_cone", "limiting_normal_cone",
             "frechet_normal_cone", "tangent_cone"}


def _add_tol_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None,
                   help="sampling seed (overrides the problem file and "
                        f"${_SEED_ENV})")
    p.add_argument("--tol-mem", type=float, default=None,
                   help="membership tolerance")
    p.add_argument("--tol-dir", type=float, default=None,
                   help="direction tolerance in radians")
    p.add_argument("--grid-res", type=int, default=None,
                   help="oracle lattice resolution per axis")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vacone",
                                 description="normal cones, coderivatives and "
                                             "subdifferentials relative to a set")
    sub = ap.add_subparsers(dest="command", required=True)

    rp = sub.add_parser("run", help="run a problem file")
    rp.add_argument("problem", help="path to the problem JSON")
    rp.add_argument("--out", default=None, help="write the report here "
                                                "instead of stdout")
    rp.add_argument("--engine", choices=("A", "B", "oracle"), default=None,
                    help="force one engine for every query")
    rp.add_argument("--only", default=None,
                    help="comma-separated query ids to run")
    rp.add_argument("--expect-hold", default=None,
                    help="comma-separated query ids whose result must report "
                         "holds=true; exit 2 otherwise")
    _add_tol_flags(rp)

    sp = sub.add_parser("paper-suite", help="run the bundled problems against "
                                            "the packaged expectations")
    sp.add_argument("--out", default=None,
                    help="directory for the per-problem reports")
    sp.add_argument("--only", default=None,
                    help="comma-separated fixture names to run")
    _add_tol_flags(sp)

    pp = sub.add_parser("plot", help="draw one cone query as SVG")
    pp.add_argument("problem", help="path to the problem JSON")
    pp.add_argument("--query", required=True, help="query id to draw")
    pp.add_argument("--out", "--svg", dest="out", default="scene.svg",
                    help="output SVG path")
    pp.add_argument("--engine", choices=("A", "B", "oracle"), default=None)
    _add_tol_flags(pp)
    return ap


def _config_for(doc: dict, args) -> ToleranceConfig:
    cfg = DEFAULT_CONFIG
    file_cfg = doc.get("config", {})
    if not isinstance(file_cfg, dict):
        raise InputError("config must be an object")
    updates = {}
    for key in ("tol_mem", "tol_dir", "grid_res"):
        if key in file_cfg:
            updates[key] = file_cfg[key]
        flag = getattr(args, key, None)
        if flag is not None:
            updates[key] = flag
    seed = cfg.seed
    env_seed = os.environ.get(_SEED_ENV)
    if env_seed is not None:
        try:
            seed = int(env_seed)
        except ValueError:
            raise InputError(f"${_SEED_ENV} must be an integer, got "
                             f"{env_seed!r}") from None
    if "seed" in doc:
        seed = int(doc["seed"])
    if args.seed is not None:
        seed = args.seed
    updates["seed"] = seed
    return cfg.with_(**updates)


def _ids(text: str | None) -> set[str] | None:
    if text is None:
        return None
    ids = {t.strip() for t in text.split(",") if t.strip()}
    if not ids:
        raise InputError("empty id list")
    return ids


def _cmd_run(args) -> int:
    from .problems import canonical_json, load_problem, run_report

    doc = load_problem(args.problem)
    cfg = _config_for(doc, args)
    report = run_report(doc, cfg, engine_override=args.engine,
                        only=_ids(args.only))
    text = canonical_json(report)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    expect = _ids(args.expect_hold)
    if expect:
        by_id = {row["id"]: row["result"] for row in report["queries"]}
        failed = []
        for qid in sorted(expect):
            if qid not in by_id:
                raise InputError(f"--expect-hold names unknown query {qid!r}")
            if not by_id[qid].get("holds", False):
                failed.append(qid)
        for qid in failed:
            print(f"expectation failed: {qid} does not hold", file=sys.stderr)
        if failed:
            return 2
    return 0


def _load_expectations() -> dict:
    ref = resources.files("vacone").joinpath("data/expectations.json")
    with ref.open() as fh:
        return json.load(fh)


def _cmd_paper_suite(args) -> int:
    from .fixtures import builtin_problem
    from .problems import canonical_json, compare_result, run_report

    cfg = _config_for({}, args)
    expected = _load_expectations()["entries"]
    names = _SUITE_ORDER
    only = _ids(args.only)
    if only:
        unknown = only - set(_SUITE_ORDER)
        if unknown:
            raise InputError(f"unknown fixtures {sorted(unknown)}; choose "
                             f"from {list(_SUITE_ORDER)}")
        names = tuple(n for n in _SUITE_ORDER if n in only)
    # the expectations were recorded at the default tolerances; under
    # overridden ones a mismatch is a sensitivity report, not a failure
    sensitivity = (cfg.tol_mem != DEFAULT_CONFIG.tol_mem
                   or cfg.tol_dir != DEFAULT_CONFIG.tol_dir
                   or cfg.grid_res != DEFAULT_CONFIG.grid_res)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
    n_pass = n_fail = n_warn = 0
    for name in names:
        report = run_report(builtin_problem(name), cfg)
        if args.out:
            with open(os.path.join(args.out, f"suite-{name}.json"), "w") as fh:
                fh.write(canonical_json(report))
        for row in report["queries"]:
            key = f"{name}/{row['id']}"
            entry = expected.get(key)
            if entry is None:
                print(f"SKIP {key} (no expectation on file)")
                continue
            ok, fails, warns = compare_result(row["result"], entry, cfg)
            for w in warns:
                n_warn += 1
                print(f"WARN {key}: {w}")
            if ok:
                n_pass += 1
                print(f"PASS {key}")
            elif sensitivity:
                n_warn += len(fails)
                for f in fails:
                    print(f"WARN {key}: tolerance sensitivity: {f}")
            else:
                n_fail += 1
                for f in fails:
                    print(f"FAIL {key}: {f}")
    print(f"suite: {n_pass} passed, {n_fail} failed, {n_warn} warnings")
    return 2 if n_fail else 0


def _cmd_plot(args) -> int:
    from .problems import build_problem, load_problem, run_query
    from .svgplot import write_scene
    import numpy as np

    doc = load_problem(args.problem)
    cfg = _config_for(doc, args)
    env = build_problem(doc)
    match = [q for q in doc.get("queries", ())
             if str(q.get("id")) == args.query]
    if not match:
        raise InputError(f"no query with id {args.query!r}")
    q = match[0]
    if q.get("op") not in _PLOT_OPS:
        raise InputError(f"plotting supports {sorted(_PLOT_OPS)}, "
                         f"not {q.get('op')!r}")
    omega = env.set_(q.get("set"))
    if omega.dim != 2:
        raise InputError("figures are drawn in the plane only")
    engine = args.engine or q.get("engine") or "B"
    result = run_query(env, q, cfg, engine)
    body = env.set_(q["body"]) if q.get("body") else None
    rays = np.asarray(result["rays"], dtype=float)
    write_scene(args.out, omega, np.asarray(q["point"], dtype=float), rays,
                body=body, cfg=cfg, title=f"{q['op']} @ {args.query}")
    print(f"wrote {args.out} ({rays.shape[0]} rays)")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "paper-suite":
            return _cmd_paper_suite(args)
        return _cmd_plot(args)
    except (InputError, NumericalFailure, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
