"""
Command line entry point.

    pushsum run    --config CFG --out DIR [--solution oracle.json] [--plot]
    pushsum oracle --config CFG --out DIR
    pushsum check  --config CFG [--out DIR]
    pushsum check-schedule --config CFG [--out DIR]

Exit codes: 0 success, 1 validation failure, 2 runtime failure.
``PUSHSUM_THREADS`` caps the per-agent gradient fan-out.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path
from typing import Optional

import numpy as np

from . import report
from .config import ConfigError, LoadedConfig, build_graph, build_params, load_config
from .energy import (
    InstanceError,
    check_assumption4,
    estimate_multipliers,
    find_slater_point,
    instance_from_dict,
    kkt_residuals,
    lift_reduced,
    verify_prop2,
)
from .engine import EngineError, run
from .netgraph import certify_B, is_strongly_connected
from .oracle import OracleError, brute_force_solve, centralized_penalized_solve, penalty_path_probe
from .penalty import penalty_value
from .schedules import ScheduleError, certify_schedule
from .schema import CHECK_SCHEMA, CONFIG_SCHEMA, FINAL_SCHEMA, ORACLE_SCHEMA, SCHEMA_VERSION, validate

log = logging.getLogger("pushsum")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2

__all__ = ["main", "cmd_run", "cmd_oracle", "cmd_check", "cmd_check_schedule", "reference_solution"]


def _fail(code: int, msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def _load(config_path, seed) -> LoadedConfig:
    try:
        return load_config(config_path, seed)
    except ScheduleError as exc:
        raise ConfigError(str(exc)) from None
    except InstanceError as exc:
        raise ConfigError(f"problem: {exc}") from None


def _schedule_problems(lc: LoadedConfig) -> list:
    rep = certify_schedule(lc.params, horizon=lc.cert_horizon)
    return [f"({v.clause}) {v.description}: {v.detail}" for v in rep.verdicts if not v.passed]


def _preflight(lc: LoadedConfig) -> Optional[str]:
    """Certification checks a run depends on; returns a message on failure."""
    failed = _schedule_problems(lc)
    if failed:
        msg = "schedule clause " + "; ".join(failed)
        if not lc.allow_uncertified:
            return msg
        log.warning("running uncertified schedule: %s", msg)
    B = lc.graph.claimed_B
    if B is not None and not certify_B(lc.graph, B, lc.raw["graph"].get("probe_horizon", 1000)):
        return f"graph schedule is not {B}-strongly connected"
    return None


def _read_solution(path, lc: LoadedConfig) -> np.ndarray:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read solution {str(path)!r}: {exc}") from None
    try:
        validate(doc, ORACLE_SCHEMA, "solution")
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    sol = np.asarray(doc["point"], dtype=float)
    if sol.shape != (lc.run.dim,):
        raise ConfigError(f"solution has {sol.size} entries, problem dimension is {lc.run.dim}")
    return sol[lc.solution_coords()]


def cmd_run(config_path, out_dir, seed=None, solution=None, plot=False) -> int:
    """Run the engine and write ``metrics.csv``, ``final.json`` and, given a
    reference solution, ``relative_error.csv``."""
    try:
        lc = _load(config_path, seed)
        msg = _preflight(lc)
        if msg:
            return _fail(EXIT_INVALID, msg)
        sol = _read_solution(solution, lc) if solution else None
    except ConfigError as exc:
        return _fail(EXIT_INVALID, str(exc))

    try:
        with warnings.catch_warnings():
            # preflight already reported on connectivity
            warnings.simplefilter("ignore")
            m = run(lc.run)
    except EngineError as exc:
        return _fail(EXIT_RUNTIME, str(exc))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header, rows = report.metrics_rows(m)
    report.write_csv(out / "metrics.csv", header, rows)
    report.write_json(out / "final.json", report.final_summary(m, lc.problems), FINAL_SCHEMA, "final.json")
    if lc.run.trace:
        report.write_csv(out / "trace.csv", *report.trace_rows(m))
    if sol is not None:
        xb = np.asarray(m.x_bar)[:, lc.solution_coords()]
        err = report.relative_errors(xb, sol)
        report.write_csv(
            out / "relative_error.csv",
            ["round"] + [f"error_{k}" for k in range(err.shape[1])],
            [[t, *e] for t, e in zip(m.rounds, err)],
        )
    if plot and m.rounds:
        report.plot_metrics(m, out / "metrics.png")
        if sol is not None:
            labels = _coord_labels(lc, err.shape[1])
            report.plot_relative_error(m.rounds, err, labels, out / "relative_error.png")
    log.info("wrote %s", out)
    return EXIT_OK


def _coord_labels(lc: LoadedConfig, k: int) -> list:
    if lc.energy is not None:
        e = lc.energy
        return [f"gen {i + 1}" for i in range(e.n_gen)] + [f"demand {j + 1}" for j in range(e.n_dem)]
    return [f"coord {i}" for i in range(k)]


def _block(problems, z) -> dict:
    z = np.asarray(z, dtype=float)
    return {
        "point": z.tolist(),
        "objective": float(sum(p.base.objective_value(z) for p in problems)),
        "penalty": float(sum(penalty_value(p, z) for p in problems)),
    }


def reference_solution(lc: LoadedConfig) -> dict:
    """Run the centralized oracles configured for ``lc`` and assemble the
    ``oracle.json`` document."""
    o = lc.oracle
    kind = lc.kind
    problems = lc.problems
    n, d = lc.run.n, lc.run.dim
    doc = {"version": SCHEMA_VERSION, "problem": kind}
    x0 = np.zeros((n, d)) if lc.run.x0 is None else np.asarray(lc.run.x0)
    z0 = x0.mean(axis=0)

    if kind == "averaging":
        doc["analytic"] = _block(problems, z0)
        point = z0
    elif kind == "quadratic":
        centers = np.asarray(lc.raw["problem"]["centers"], dtype=float)
        point = centers.mean(axis=0)
        doc["analytic"] = _block(problems, point)
        box = o.get("box") or [(centers.min(0) - 1).tolist(), (centers.max(0) + 1).tolist()]
        bf = brute_force_solve(problems, box, grid=o.get("grid", 101), refine=o.get("refine", 6), r=o.get("r", 1e6))
        doc["brute_force"] = _block(problems, bf.point)
    elif kind == "toy":
        lower = lc.raw["problem"].get("lower", 1.0)
        doc["analytic"] = _block(problems, np.array([max(lower, 0.0)]))
        box = o.get("box") or [[lower - 5.0], [lower + 5.0]]
        bf = brute_force_solve(problems, box, grid=o.get("grid", 101), refine=o.get("refine", 6), r=o.get("r", 1e6))
        doc["brute_force"] = _block(problems, bf.point)
        point = bf.point
    else:
        e = lc.energy
        lift, lo, hi = lift_reduced(e)
        if o.get("box"):
            lo, hi = o["box"]
        bf = brute_force_solve(
            problems, (lo, hi), grid=o.get("grid", 101), refine=o.get("refine", 6), lift=lift, r=o.get("r", 1e6)
        )
        doc["brute_force"] = _block(problems, bf.point)
        point = bf.point
        p, v = point[: e.n_nodes], point[e.n_nodes :]
        mult = estimate_multipliers(e, p, v)
        res = kkt_residuals(e, p, v, mult)
        doc["kkt"] = dict(res.to_dict(), max=res.max())
        doc["multipliers"] = mult.to_dict()
        doc["prop2"] = verify_prop2(e, p, v, o.get("kkt_tol", 1e-4))

    rounds = o.get("rounds", lc.run.max_rounds if kind in ("quadratic", "toy") else 0)
    if rounds:
        zc = centralized_penalized_solve(problems, lc.params, rounds, z0, step_scale=1.0 / n)
        doc["centralized"] = _block(problems, zc)
    if o.get("path_r"):
        path = penalty_path_probe(problems, o["path_r"], z0)
        doc["path"] = [
            {"r": pt.r, "minimizer": pt.minimizer.tolist(), "value": pt.value, "objective": pt.objective, "iterations": pt.iterations}
            for pt in path
        ]
    doc["point"] = np.asarray(point, dtype=float).tolist()
    doc["objective"] = float(sum(p.base.objective_value(point) for p in problems))
    doc["slacks"] = report.constraint_slacks(problems, point)
    return doc


def cmd_oracle(config_path, out_dir, seed=None) -> int:
    try:
        lc = _load(config_path, seed)
    except ConfigError as exc:
        return _fail(EXIT_INVALID, str(exc))
    try:
        doc = reference_solution(lc)
    except (OracleError, ValueError) as exc:
        return _fail(EXIT_RUNTIME, f"oracle failed: {exc}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report.write_json(out / "oracle.json", doc, ORACLE_SCHEMA, "oracle.json")
    if doc.get("prop2") is False:
        return _fail(EXIT_RUNTIME, "oracle solution does not satisfy the lossy balance (loss variables not tight)")
    return EXIT_OK


def _energy_report(raw_problem: dict) -> dict:
    try:
        e = instance_from_dict(raw_problem, check=False)
    except InstanceError as exc:
        return {"passed": False, "error": str(exc)}
    bounds = check_assumption4(e)
    slater = find_slater_point(e)
    return {
        "passed": bool(bounds and slater.found),
        "bounds_condition": bool(bounds),
        "slater_point": slater.to_dict(),
    }


def _check_report(raw: dict, seed: Optional[int], schedule_only: bool) -> dict:
    validate(raw, CONFIG_SCHEMA, "config")
    seed = raw.get("seed", 0) if seed is None else seed
    s = raw["schedule"]
    try:
        params = build_params(s)
        cert = certify_schedule(params, horizon=s.get("horizon", 10**6)).to_dict()
    except ScheduleError as exc:
        cert = {"passed": False, "error": str(exc), "clause": exc.clause}
    doc = {"version": SCHEMA_VERSION, "schedule": cert, "graph": {}, "energy": None}
    if not schedule_only:
        g = build_graph(raw["graph"], seed)
        B = g.claimed_B
        doc["graph"] = {
            "claimed_B": B,
            "per_graph_strongly_connected": [is_strongly_connected(x) for x in g.graphs],
            "verified": None if B is None else bool(certify_B(g, B, raw["graph"].get("probe_horizon", 1000))),
        }
        doc["graph"]["passed"] = bool(doc["graph"]["verified"])
        if raw["problem"]["kind"] == "energy":
            doc["energy"] = _energy_report(raw["problem"])
    parts = [cert["passed"]]
    if not schedule_only:
        parts.append(doc["graph"]["passed"])
        if doc["energy"] is not None:
            parts.append(doc["energy"]["passed"])
    doc["passed"] = all(parts)
    return doc


def _cmd_check(config_path, out_dir, seed, schedule_only) -> int:
    try:
        raw = json.loads(Path(config_path).read_text())
        doc = _check_report(raw, seed, schedule_only)
    except (OSError, json.JSONDecodeError) as exc:
        return _fail(EXIT_INVALID, f"cannot read config {str(config_path)!r}: {exc}")
    except ValueError as exc:
        return _fail(EXIT_INVALID, str(exc))
    validate(doc, CHECK_SCHEMA, "check report")
    print(json.dumps(doc, indent=2, sort_keys=True))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        name = "check_schedule.json" if schedule_only else "check.json"
        report.write_json(out / name, doc, CHECK_SCHEMA, name)
    return EXIT_OK if doc["passed"] else EXIT_INVALID


def cmd_check(config_path, out_dir=None, seed=None) -> int:
    """Connectivity, schedule and instance checks; exit 0 iff all pass."""
    return _cmd_check(config_path, out_dir, seed, schedule_only=False)


def cmd_check_schedule(config_path, out_dir=None, seed=None) -> int:
    return _cmd_check(config_path, out_dir, seed, schedule_only=True)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pushsum", description="Penalty-based push-sum simulator and checks.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", required=True, help="run config (JSON)")
        p.add_argument("--out", required=out_required, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")

    p = sub.add_parser("run", help="simulate and write metrics")
    common(p)
    p.add_argument("--solution", help="oracle.json to compute relative errors against")
    p.add_argument("--plot", action="store_true", help="also write PNG figures next to the CSVs")
    common(sub.add_parser("oracle", help="solve centrally and write oracle.json"))
    common(sub.add_parser("check", help="validate graph, schedule and instance"), out_required=False)
    common(sub.add_parser("check-schedule", help="certify the parameter schedule only"), out_required=False)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    if args.command == "run":
        return cmd_run(args.config, args.out, args.seed, args.solution, args.plot)
    if args.command == "oracle":
        return cmd_oracle(args.config, args.out, args.seed)
    if args.command == "check":
        return cmd_check(args.config, args.out, args.seed)
    return cmd_check_schedule(args.config, args.out, args.seed)


if __name__ == "__main__":
    sys.exit(main())
