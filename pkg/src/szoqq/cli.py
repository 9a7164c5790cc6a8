"""Command-line front end: ``szoqq run | verify | list``.

Exit codes of ``run``: 0 both termination conditions met, 2 iteration cap,
3 oracle error, 1 configuration error. ``verify`` exits 0 iff the replayed
sample log is consistent with ground truth, no sample was infeasible and the
trace agrees with the log.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from .core import AlgorithmConfig, EpigraphTruth, SmoothnessParams, TerminationReason, kkt_residual
from .driver import EVENT_CLAMP, EVENT_CONSTANTS, EVENT_LAMBDA, EVENT_SP1, EVENT_SP2, IterationRecord, run
from .problems import REGISTRY, get_problem, list_problems, prepare_run

TRACE_COLUMNS = [
    "k",
    "f0",
    "step_norm",
    "nu",
    "lambda_inf",
    "delta1",
    "delta2_max",
    "samples_cumulative",
    "wall_time_ms",
    "events",
]
KNOWN_EVENTS = {EVENT_CLAMP, EVENT_CONSTANTS, EVENT_LAMBDA, EVENT_SP1, EVENT_SP2}
EXIT_CODES = {
    TerminationReason.BOTH_CONDITIONS_MET: 0,
    TerminationReason.MAX_ITERATIONS: 2,
    TerminationReason.ORACLE_ERROR: 3,
}

_pos = {"type": "number", "exclusiveMinimum": 0}
_pos_or_array = {"oneOf": [_pos, {"type": "array", "items": _pos, "minItems": 1}]}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["problem", "eta", "mu", "lambda_cap", "lipschitz", "smoothness"],
    "properties": {
        "problem": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name"],
            "properties": {"name": {"type": "string"}, "params": {"type": "object"}},
        },
        "eta": _pos,
        "mu": _pos,
        "lambda_cap": _pos,
        "kappa": {"type": "number", "exclusiveMinimum": 1},
        "xi": {"oneOf": [{"const": "auto"}, _pos]},
        "lipschitz": _pos_or_array,
        "smoothness": _pos_or_array,
        "objective_constants": {
            "type": "object",
            "additionalProperties": False,
            "required": ["lipschitz", "smoothness"],
            "properties": {"lipschitz": _pos, "smoothness": _pos},
        },
        "epigraph_margin": _pos,
        "adaptation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "enabled": {"type": "boolean"},
                "growth_factor": {"type": "number", "exclusiveMinimum": 1},
                "lambda_updates": {"type": "boolean"},
            },
        },
        "max_iterations": {"type": "integer", "minimum": 0},
        "time_limit": _pos,
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"sp1": _pos, "sp2": _pos, "sp1_max_iter": {"type": "integer", "minimum": 1}},
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"trace": {"type": "string"}, "report": {"type": "string"}},
        },
        "seed": {"type": "integer"},
    },
}


class ConfigError(Exception):
    pass


class VerifyError(Exception):
    pass


def _fail(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def load_config(path) -> dict:
    """Read and schema-check a run configuration; raises ConfigError."""
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from exc
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from exc
    if cfg["problem"]["name"] not in REGISTRY:
        raise ConfigError(f"unknown problem {cfg['problem']['name']!r}")
    return cfg


def _problem_params(cfg: dict, seed: int | None) -> dict:
    params = dict(cfg["problem"].get("params", {}))
    if seed is not None and cfg["problem"]["name"] == "random":
        params["seed"] = seed
    return params


def _effective_seed(cfg: dict) -> int | None:
    env = os.environ.get("SZOQQ_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"SZOQQ_SEED must be an integer, got {env!r}") from None
    return cfg.get("seed")


def _per_constraint(value, m: int, what: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(m, float(arr))
    if arr.size != m:
        raise ConfigError(f"{what} has {arr.size} entries but the problem has {m} constraints")
    return arr


def build_run(cfg: dict, seed: int | None):
    """Problem, prepared solver inputs and algorithm config from a validated document."""
    try:
        problem = get_problem(cfg["problem"]["name"], **_problem_params(cfg, seed))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad problem parameters: {exc}") from exc
    m = problem.n_constraints
    adaptation = cfg.get("adaptation", {})
    smooth = SmoothnessParams(
        _per_constraint(cfg["lipschitz"], m, "lipschitz"),
        _per_constraint(cfg["smoothness"], m, "smoothness"),
        adaptation.get("growth_factor", 2.0),
    )
    obj = cfg.get("objective_constants")
    if problem.known_objective is None and obj is None:
        raise ConfigError(f"problem {problem.name!r} has an unknown objective; set objective_constants")
    tol = cfg.get("tolerances", {})
    try:
        algo = AlgorithmConfig(
            mu=cfg["mu"],
            eta=cfg["eta"],
            lambda_bound=cfg["lambda_cap"],
            kappa=cfg.get("kappa", 2.0),
            xi=cfg.get("xi", "auto"),
            max_iterations=cfg.get("max_iterations", 100_000),
            adapt_lambda=adaptation.get("lambda_updates", True),
            adapt_constants=adaptation.get("enabled", True),
            sp1_tol=tol.get("sp1", 1e-9),
            sp2_tol=tol.get("sp2", 1e-9),
            sp1_max_iter=tol.get("sp1_max_iter", 10_000),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return problem, smooth, algo


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def trace_row(rec: IterationRecord) -> list[str]:
    return [
        str(rec.k),
        _cell(rec.f0),
        _cell(rec.step_norm),
        _cell(rec.nu),
        _cell(rec.lambda_inf),
        _cell(rec.delta1),
        _cell(rec.delta2_max),
        str(rec.samples_cumulative),
        f"{rec.wall_time_ms:.3f}",
        ";".join(rec.events),
    ]


def samples_path_for(trace_path) -> Path:
    p = Path(trace_path)
    return p.with_name(p.stem + ".samples.csv")


def report_path_for(trace_path) -> Path:
    p = Path(trace_path)
    return p.with_name(p.stem + ".report.json")


def write_samples(path, oracle) -> None:
    d, m = oracle.dimension, oracle.n_constraints
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample", "tag"] + [f"x{j}" for j in range(d)] + [f"f{i}" for i in range(m + 1)])
        for n, rec in enumerate(oracle.sample_log):
            vals = [""] * (m + 1)
            for i, v in zip(rec.indices, rec.values):
                vals[i] = repr(float(v))
            tag = "" if rec.tag is None else str(rec.tag)
            w.writerow([str(n), tag] + [repr(float(v)) for v in rec.point] + vals)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        seed = _effective_seed(cfg)
        problem, smooth, algo = build_run(cfg, seed)
    except ConfigError as exc:
        return _fail("config", str(exc), 1)

    out = cfg.get("output", {})
    trace_path = Path(args.trace or out.get("trace") or "trace.csv")
    report_path = Path(args.report or out.get("report") or report_path_for(trace_path))
    obj = cfg.get("objective_constants")
    consts = None if obj is None else (obj["lipschitz"], obj["smoothness"])
    try:
        prepared = prepare_run(problem, smooth, consts, cfg.get("epigraph_margin", 1.0))
    except Exception as exc:  # noqa: BLE001 - initial lift queries the oracle
        return _fail("oracle", str(exc), 3)

    trace_path.parent.mkdir(parents=True, exist_ok=True)
    with open(trace_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)

        def on_record(rec):
            writer.writerow(trace_row(rec))
            if not args.quiet and rec.k % 100 == 0:
                print(f"k={rec.k} f0={rec.f0:.10g} step={rec.step_norm:.3e}", file=sys.stderr)

        report, records = run(
            prepared.oracle, algo, prepared.x0, prepared.smoothness, on_record, cfg.get("time_limit")
        )
    write_samples(samples_path_for(trace_path), prepared.oracle)

    res = kkt_residual(prepared.truth, report.x_tilde, report.lambda_tilde)
    d = problem.dimension
    x_orig = report.x_tilde[:d]
    doc = {
        "problem": {"name": problem.name, "params": problem.params()},
        "lifted": prepared.lifted,
        "seed": seed,
        "reason": report.reason.value,
        "message": report.message,
        "k_tilde": report.k_tilde,
        "x_tilde": report.x_tilde,
        "lambda_tilde": report.lambda_tilde,
        "lambda_tilde_inf": float(np.max(report.lambda_tilde, initial=0.0)),
        "lambda_bound": report.lambda_bound,
        "xi": report.xi,
        "eta": algo.eta,
        "eta_kkt_residual": res.max_residual,
        "stationarity": res.stationarity,
        "complementarity_max": float(np.max(res.complementarity, initial=0.0)),
        "primal_feasible": res.primal_feasible,
        "objective": problem.objective(x_orig),
        "max_constraint": float(np.max(problem.constraints(x_orig))),
        "x_original": x_orig,
        "lipschitz_final": report.smoothness.L if report.smoothness is not None else None,
        "smoothness_final": report.smoothness.M if report.smoothness is not None else None,
        "infeasible_sample_count": report.smoothness.infeasible_sample_count if report.smoothness else 0,
        "lambda_updates": report.extra.get("lambda_updates", 0),
        "n_point_queries": report.n_point_queries,
        "iterations_recorded": len(records),
        "trace": str(trace_path),
        "samples": str(samples_path_for(trace_path)),
    }
    doc = {k: _jsonable(v) for k, v in doc.items()}
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(json.dumps(doc, indent=2) + "\n")
    if not args.quiet:
        print(
            f"{report.reason.value}: k={report.k_tilde} objective={doc['objective']:.10g} "
            f"eta_kkt_residual={res.max_residual:.3e}"
        )
    return EXIT_CODES[report.reason]


def _read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise VerifyError(f"{path} is empty")
    return rows[0], rows[1:]


def _close(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-12)


def verify_run(trace_path, problem_name: str | None = None, report_path=None) -> dict:
    """Replay a run's sample log against ground truth and cross-check the trace.

    Returns a summary dict; raises VerifyError on any inconsistency.
    """
    trace_path = Path(trace_path)
    report_path = Path(report_path) if report_path else report_path_for(trace_path)
    try:
        report = json.loads(report_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise VerifyError(f"cannot read report {report_path}: {exc}") from exc
    name = report["problem"]["name"]
    if problem_name is not None and problem_name != name:
        raise VerifyError(f"trace belongs to problem {name!r}, not {problem_name!r}")
    problem = get_problem(name, **report["problem"]["params"])
    truth = EpigraphTruth(problem) if report["lifted"] else problem

    header, samples = _read_csv(samples_path_for(trace_path))
    dim = truth.dimension
    m = truth.n_constraints
    if len(header) != 2 + dim + m + 1:
        raise VerifyError("sample log does not match the problem's dimensions")
    truth_f0 = []
    infeasible = 0
    for row in samples:
        x = np.array([float(v) for v in row[2 : 2 + dim]])
        cons = np.asarray(truth.constraints(x), dtype=float)
        full = np.append(truth.objective(x), cons)
        for i, cell in enumerate(row[2 + dim :]):
            if cell and not _close(float(cell), float(full[i])):
                raise VerifyError(f"sample {row[0]}: logged f{i} = {cell} but ground truth gives {full[i]!r}")
        truth_f0.append(float(full[0]))
        if np.any(cons > 0):
            infeasible += 1

    header, rows = _read_csv(trace_path)
    if header != TRACE_COLUMNS:
        raise VerifyError(f"trace columns {header} differ from {TRACE_COLUMNS}")
    prev_cum = 0
    for n, row in enumerate(rows):
        rec = dict(zip(TRACE_COLUMNS, row))
        try:
            k = int(rec["k"])
            f0 = float(rec["f0"])
            cum = int(rec["samples_cumulative"])
        except ValueError as exc:
            raise VerifyError(f"trace row {n}: {exc}") from exc
        if k != n:
            raise VerifyError(f"trace row {n} has k = {k}")
        if not prev_cum <= cum <= len(samples):
            raise VerifyError(f"trace row {n}: samples_cumulative {cum} inconsistent with the sample log")
        anchor = 0 if n == 0 else prev_cum - 1
        if anchor >= len(truth_f0) or not _close(f0, truth_f0[anchor]):
            raise VerifyError(f"trace row {n}: f0 = {f0!r} does not match the replayed sample {anchor}")
        sp2 = [rec["lambda_inf"], rec["delta1"], rec["delta2_max"]]
        if any(sp2) and not all(sp2):
            raise VerifyError(f"trace row {n}: SP2 columns partially filled")
        events = [e for e in rec["events"].split(";") if e]
        unknown = set(events) - KNOWN_EVENTS
        if unknown:
            raise VerifyError(f"trace row {n}: unknown events {sorted(unknown)}")
        prev_cum = cum
    if rows and report["reason"] == TerminationReason.BOTH_CONDITIONS_MET.value and prev_cum != len(samples):
        raise VerifyError("sample log has samples after the final trace row")

    res = kkt_residual(truth, report["x_tilde"], report["lambda_tilde"])
    return {
        "problem": name,
        "samples": len(samples),
        "iterations": len(rows),
        "infeasible_samples": infeasible,
        "kkt_residual": res.max_residual,
        "primal_feasible": res.primal_feasible,
    }


def cmd_verify(args) -> int:
    if args.trace is None:
        return _fail("usage", "verify needs --trace", 1)
    try:
        summary = verify_run(args.trace, args.problem, args.report)
    except VerifyError as exc:
        return _fail("mismatch", str(exc), 1)
    except (OSError, KeyError, ValueError, TypeError) as exc:
        return _fail("mismatch", f"{type(exc).__name__}: {exc}", 1)
    print(f"infeasible_samples: {summary['infeasible_samples']}")
    print(f"kkt_residual: {summary['kkt_residual']:.6e}")
    if not args.quiet:
        print(f"samples: {summary['samples']}  iterations: {summary['iterations']}  trace: ok")
    return 0 if summary["infeasible_samples"] == 0 else 1


def cmd_list(args) -> int:
    for line in list_problems():
        print(line)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="szoqq", description="Safe zeroth-order sequential QCQP solver")
    sub = ap.add_subparsers(dest="verb", required=True)

    def common(p):
        p.add_argument("--trace", help="trace CSV path")
        p.add_argument("--report", help="JSON report path (default: <trace>.report.json)")
        p.add_argument("--quiet", action="store_true")

    p_run = sub.add_parser("run", help="run the solver on a configured problem")
    p_run.add_argument("--config", required=True)
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_ver = sub.add_parser("verify", help="audit a finished run against ground truth")
    p_ver.add_argument("--problem", help="expected problem name")
    common(p_ver)
    p_ver.set_defaults(func=cmd_verify)

    p_list = sub.add_parser("list", help="list the available problems")
    p_list.set_defaults(func=cmd_list)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if getattr(args, "quiet", False) else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
