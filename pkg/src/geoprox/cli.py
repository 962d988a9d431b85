"""Command line front end: ``geoprox run | verify | sweep``.

Exit codes
----------
run     0 success, 2 inner solver failure, 3 config error
verify  0 all properties pass, 1 some property fails, 3 bad arguments
sweep   0 all runs succeed, 1 some run failed, 3 config error
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import logging
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, List, Optional, Sequence

import numpy as np
import yaml

from .functionals import ConvexFunctional, FunctionalDomainError, random_functional
from .geometry import GeometryError, ModelSpace, SpherePoint, angle, check_admissible, random_in_cap
from .oracle import GridSpec, reference_minimizer
from .ppa import (
    PpaError,
    PpaTrace,
    RunConfig,
    StepSchedule,
    bound_constants,
    check_fejer,
    check_rate_bound,
    existence_certificate,
    iter_rows,
    run_ppa,
)
from .resolvent import InnerSolverConfig
from .suites import SUITES, run_suite

log = logging.getLogger("geoprox")

EXIT_OK, EXIT_FAIL, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2, 3
CSV_COLUMNS = ("n", "lambda", "f_value", "step_distance", "dist_to_reference", "rate_bound", "fejer_ok")
CONVERGED_STEP = 1e-8
SWEEP_PARAMS = ("lambda", "anchors-seed", "kappa")

_SCHEMA = {
    "space": {"dim", "kappa"},
    "functional": {"kind", "anchors", "weights", "components", "offset"},
    "init": None,
    "schedule": {"kind", "value", "list", "divergent"},
    "run": {"max_iterations", "stop_step_tol", "stop_gap_tol", "seed"},
    "solver": {"method", "tol", "max_iter", "fd_step"},
    "oracle": {"spacing", "refinement_rounds", "enabled"},
    "outputs": {"trace_path", "summary_path"},
}


class ConfigError(ValueError):
    """Malformed or invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    space: ModelSpace
    functional: ConvexFunctional
    init: Optional[SpherePoint]
    schedule: StepSchedule
    run: RunConfig
    solver: InnerSolverConfig
    oracle: Optional[GridSpec]
    trace_path: str = "trace.csv"
    summary_path: str = "summary.json"
    stop_gap_tol: Optional[float] = None
    raw: Optional[dict] = None

    @classmethod
    def from_dict(cls, raw: Any) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a mapping")
        unknown = set(raw) - set(_SCHEMA)
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        for key, allowed in _SCHEMA.items():
            sec = raw.get(key)
            if allowed is None or sec is None:
                continue
            if not isinstance(sec, dict):
                raise ConfigError(f"section {key!r} must be a mapping")
            bad = set(sec) - allowed
            if bad:
                raise ConfigError(f"unknown keys in {key!r}: {sorted(bad)}")
        if "functional" not in raw:
            raise ConfigError("config needs a 'functional' section")
        try:
            sp = raw.get("space") or {}
            space = ModelSpace(int(sp.get("dim", 2)), float(sp.get("kappa", 1.0)))
            f = ConvexFunctional.from_config(raw["functional"])
            if f.dim is not None and f.dim != space.dim:
                raise ConfigError(f"anchors live on S^{f.dim}, space is S^{space.dim}")
            if f.anchors and not check_admissible(f.anchors, space):
                raise ConfigError("anchors are not admissible (some pair is pi/2 or more apart)")
            init = None if raw.get("init") is None else SpherePoint(raw["init"])
            if init is not None and init.dim != space.dim:
                raise ConfigError("init does not live on the configured sphere")
            if init is not None and f.domain_violation(init.coords) is not None:
                raise ConfigError("init is not admissible with respect to the anchors")
            schedule = StepSchedule.from_config(raw.get("schedule") or {})
            r = raw.get("run") or {}
            run = RunConfig(int(r.get("max_iterations", 200)),
                            _opt_float(r.get("stop_step_tol")),
                            None, None, int(r.get("seed", 0)))
            gap_tol = _opt_float(r.get("stop_gap_tol"))
            s = raw.get("solver") or {}
            solver = InnerSolverConfig(s.get("method", "geodesic_descent"), float(s.get("tol", 1e-10)),
                                       int(s.get("max_iter", 10000)), float(s.get("fd_step", 1e-6)))
            o = raw.get("oracle") or {}
            oracle = None if o.get("enabled", True) is False else GridSpec(
                float(o.get("spacing", 0.01)), int(o.get("refinement_rounds", 3)))
            out = raw.get("outputs") or {}
        except ConfigError:
            raise
        except (ValueError, TypeError, GeometryError, FunctionalDomainError) as exc:
            raise ConfigError(str(exc)) from exc
        return cls(space, f, init, schedule, run, solver, oracle,
                   str(out.get("trace_path", "trace.csv")), str(out.get("summary_path", "summary.json")),
                   gap_tol, copy.deepcopy(raw))


def _opt_float(v) -> Optional[float]:
    return None if v is None else float(v)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from exc
    return ExperimentConfig.from_dict(raw)


# output ---------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def trace_csv(trace: PpaTrace, prefix: Sequence[tuple] = ()) -> str:
    """Trace as CSV text with the fixed column order and 17 significant digits."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([k for k, _ in prefix] + list(CSV_COLUMNS))
    for row in iter_rows(trace):
        w.writerow([_fmt(v) for _, v in prefix] + [_fmt(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def atomic_write(path: Path, text: str) -> None:
    """Write to a temp file in the target directory, then rename over ``path``."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


@dataclass
class RunSummary:
    converged: bool
    iterations: int
    final_gap: Optional[float]
    sup_step: float
    K: float
    C: float
    rate_bound_satisfied: Optional[bool]
    fejer_satisfied: Optional[bool]
    argmin_distance: Optional[float]
    wall_time_ms: int
    stop_reason: str = ""
    existence_verdict: Optional[bool] = None
    final_point: Optional[List[float]] = None

    @classmethod
    def from_trace(cls, trace: PpaTrace, wall_ms: int) -> "RunSummary":
        K, C = bound_constants(trace.l_sup, trace.space)
        has_ref = trace.reference is not None and len(trace) > 0
        ok_stop = trace.stop_reason in ("step_tol", "gap_tol", "max_iterations")
        last = trace.step_distances[-1] if len(trace) else 0.0
        verdict = existence_certificate(trace).verdict if len(trace.iterates) >= 2 else None
        return cls(
            converged=bool(ok_stop and last < CONVERGED_STEP),
            iterations=len(trace),
            final_gap=float(trace.f_values[-1] - trace.reference_value) if has_ref else None,
            sup_step=trace.l_sup,
            K=K,
            C=C,
            rate_bound_satisfied=check_rate_bound(trace).satisfied if has_ref else None,
            fejer_satisfied=check_fejer(trace).satisfied if has_ref else None,
            argmin_distance=float(angle(trace.final, trace.reference) / trace.space.sqrt_kappa) if has_ref else None,
            wall_time_ms=int(wall_ms),
            stop_reason=trace.stop_reason,
            existence_verdict=verdict,
            final_point=trace.final.coords.tolist(),
        )


# execution ------------------------------------------------------------------

def _starting_point(cfg: ExperimentConfig) -> SpherePoint:
    if cfg.init is not None:
        return cfg.init
    center, radius = cfg.functional.sampling_cap(cfg.space)
    return random_in_cap(np.random.default_rng(cfg.run.seed), center, radius, cfg.space)


def execute(cfg: ExperimentConfig):
    """Run one experiment. Returns (trace, summary, error message or None)."""
    ref = None
    if cfg.oracle is not None:
        try:
            ref = reference_minimizer(cfg.functional, cfg.space, cfg.oracle)
        except (GeometryError, ValueError) as exc:
            log.info("no reference minimizer: %s", exc)
    run = RunConfig(cfg.run.max_iterations, cfg.run.stop_step_tol,
                    cfg.stop_gap_tol if ref is not None else None,
                    None if ref is None else ref[0], cfg.run.seed)
    t0 = time.perf_counter()
    err = None
    try:
        trace = run_ppa(cfg.functional, _starting_point(cfg), cfg.schedule, cfg.space, run, cfg.solver,
                        reference_value=None if ref is None else ref[1])
    except PpaError as exc:
        trace, err = exc.trace, str(exc)
    wall = int(round(1000 * (time.perf_counter() - t0)))
    summary = RunSummary.from_trace(trace, wall)
    if err is not None:
        summary.converged = False
    return trace, summary, err


def _write_run(out_dir: Path, cfg: ExperimentConfig, trace: PpaTrace, summary: RunSummary,
               prefix: Sequence[tuple] = ()) -> None:
    atomic_write(out_dir / cfg.trace_path, trace_csv(trace, prefix))
    atomic_write(out_dir / cfg.summary_path, _json(asdict(summary)))


def cmd_run(config_path, output_dir=".") -> int:
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    trace, summary, err = execute(cfg)
    out = Path(output_dir)
    _write_run(out, cfg, trace, summary)
    if err is not None:
        log.error("%s", err)
        return EXIT_SOLVER
    log.info("iterations=%d converged=%s gap=%s", summary.iterations, summary.converged, summary.final_gap)
    return EXIT_OK


def cmd_verify(suite: str, trials: int = 100, seed: int = 0, output_dir=".") -> int:
    if trials < 1:
        log.error("trials must be at least 1")
        return EXIT_CONFIG
    if suite not in SUITES + ("all",):
        log.error("unknown suite %r", suite)
        return EXIT_CONFIG
    t0 = time.perf_counter()
    results = run_suite(suite, trials, seed)
    passed = all(r.passed for r in results)
    report = {
        "suite": suite,
        "trials": trials,
        "seed": seed,
        "passed": passed,
        "wall_time_ms": int(round(1000 * (time.perf_counter() - t0))),
        "properties": [r.to_dict() for r in results],
    }
    atomic_write(Path(output_dir) / f"verify_{suite}.json", _json(report))
    for r in results:
        log.info("%-6s %s/%s worst_slack=%.3e", "PASS" if r.passed else "FAIL", r.suite, r.name, r.worst_slack)
    return EXIT_OK if passed else EXIT_FAIL


def _variant(raw: dict, param: str, value: str) -> dict:
    raw = copy.deepcopy(raw)
    if param == "lambda":
        raw["schedule"] = {"kind": "constant", "value": float(value)}
    elif param == "kappa":
        raw.setdefault("space", {})["kappa"] = float(value)
    elif param == "anchors-seed":
        base = ExperimentConfig.from_dict(raw)
        f = base.functional
        if not f.anchors:
            raise ConfigError("anchors-seed sweep needs a functional with anchors")
        center, _ = f.sampling_cap(base.space)
        g = random_functional(np.random.default_rng(int(value)), f.kind, len(f.anchors), base.space,
                              center=center, spread=0.5)
        raw["functional"] = g.to_config()
        raw["init"] = None
    else:
        raise ConfigError(f"unknown sweep parameter {param!r}")
    return raw


def _sweep_one(raw: dict):
    cfg = ExperimentConfig.from_dict(raw)
    trace, summary, err = execute(cfg)
    return trace, summary, err


def _threads() -> int:
    env = os.environ.get("GEOPROX_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring GEOPROX_THREADS=%r", env)
    return os.cpu_count() or 1


def cmd_sweep(config_path, param: str, values: Sequence[str], output_dir=".") -> int:
    try:
        base = load_config(config_path)
        variants = [_variant(base.raw, param, v) for v in values]
        for v in variants:
            ExperimentConfig.from_dict(v)
    except (ConfigError, ValueError) as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    workers = min(_threads(), len(variants))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_one, variants))
    else:
        results = [_sweep_one(v) for v in variants]
    out = Path(output_dir)
    combined = []
    failed = False
    for value, raw, (trace, summary, err) in zip(values, variants, results):
        cfg = ExperimentConfig.from_dict(raw)
        sub = out / f"{param}={value}"
        _write_run(sub, cfg, trace, summary)
        text = trace_csv(trace, (("param", param), ("value", value)))
        combined.append(text if not combined else text.split("\n", 1)[1])
        if err is not None:
            failed = True
            log.error("%s=%s: %s", param, value, err)
    atomic_write(out / "sweep.csv", "".join(combined))
    return EXIT_FAIL if failed else EXIT_OK


# argparse -------------------------------------------------------------------

def _values(text: str) -> List[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output-dir", default=argparse.SUPPRESS, help="directory for traces and reports")
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help="only log errors")
    p = argparse.ArgumentParser(prog="geoprox", description="Proximal point experiments on spheres.")
    p.add_argument("--output-dir", default=".", help="directory for traces and reports")
    p.add_argument("--quiet", action="store_true", help="only log errors")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", parents=[common], help="run one experiment from a YAML config")
    r.add_argument("config")
    v = sub.add_parser("verify", parents=[common], help="run a randomized property suite")
    v.add_argument("suite", choices=SUITES + ("all",))
    v.add_argument("--trials", type=int, default=100)
    v.add_argument("--seed", type=int, default=0)
    s = sub.add_parser("sweep", parents=[common], help="rerun a config over a list of parameter values")
    s.add_argument("config")
    s.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    s.add_argument("--values", required=True, type=_values, help="comma separated values")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    if args.command == "run":
        return cmd_run(args.config, args.output_dir)
    if args.command == "verify":
        return cmd_verify(args.suite, args.trials, args.seed, args.output_dir)
    return cmd_sweep(args.config, args.param, args.values, args.output_dir)


if __name__ == "__main__":
    sys.exit(main())
