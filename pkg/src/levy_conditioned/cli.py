import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from .conditioning import (
    ConditionedSampleConfig,
    sample_conditioned_barrier,
    sample_conditioned_many,
    sample_entrance_law,
)
from .config import ExperimentConfig, Job, load_config
from .harmonic import (
    HarmonicEstimate,
    estimate_h_exit_grid,
    estimate_h_exponential_clock,
    estimate_h_ladder,
    h_closed_form,
)
from .models import LevyModelSpec
from .path import simulate_path, write_path_csv
from .report import TestReport, write_table_csv
from .util import ConfigError, LevyError, SamplerExhaustedError, derive_seed, named_rng
from .verify import Check, run_check

logger = logging.getLogger(__name__)

INDEX_FILE = "index.json"
MANIFEST_FILE = "manifest.json"
BUNDLE_FILE = "bundle.json"
STATISTICS_FILE = "statistics.csv"
H_METHODS = ("ladder", "exit-ratio", "exponential-clock")
# exit codes
EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_ERROR = 2

CREEPING_COLUMNS = ("x", "n_H_gt_x", "h_x", "product", "ci_lo", "ci_hi")
CONVERGENCE_COLUMNS = ("x", "distance", "critical")


def _index_entry(job: Job, status: str, report: Optional[TestReport], reason: Optional[str]):
    plain = {} if report is None else report.to_dict()
    return {
        "name": job.name,
        "check": job.check.tag,
        "model": job.model_label,
        "seed": job.seed,
        "status": status,
        "statistic": plain.get("statistic"),
        "critical_value": plain.get("critical_value"),
        "reason": reason,
    }


def _run_job(config: ExperimentConfig, job: Job, out: Path) -> Dict[str, Any]:
    try:
        report = run_check(
            job.check,
            config.models[job.model_label],
            config.settings_for(job.check),
            job.seed,
            config.workers,
        )
    except LevyError as e:
        logger.error("%s: %s", job.name, e.message)
        return _index_entry(job, "error", None, f"{type(e).__name__}: {e.message}")
    except Exception as e:
        logger.exception("%s raised", job.name)
        return _index_entry(job, "error", None, f"{type(e).__name__}: {e}")
    report.write(out, job.name)
    reason = None
    if not report.conclusive:
        reason = "; ".join(report.notes) or "inconclusive"
    return _index_entry(job, report.status, report, reason)


def run_suite(
    config: Union[str, Path, ExperimentConfig], only: Optional[Sequence[Check]] = None
) -> int:
    """
    Run every selected job (restricted to the checks in `only` when given), write one
    report per job and the index, and return the exit code: 2 when any job errored,
    1 when any failed, 0 otherwise. A job that raises never stops the others.
    """
    if not isinstance(config, ExperimentConfig):
        config = load_config(config)
    jobs = [j for j in config.jobs if only is None or j.check in only]
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    logger.info("running %d jobs into %s", len(jobs), out)

    # jobs run one after the other; replicates inside a job use the worker pool
    entries = [_run_job(config, job, out) for job in jobs]
    entries.sort(key=lambda e: e["name"])
    (out / INDEX_FILE).write_text(json.dumps(entries, sort_keys=True, indent=2) + "\n")

    statuses = {e["status"] for e in entries}
    logger.info(
        "%d passed, %d failed, %d errored",
        sum(e["status"] == "pass" for e in entries),
        sum(e["status"] == "fail" for e in entries),
        sum(e["status"] == "error" for e in entries),
    )
    if "error" in statuses:
        return EXIT_ERROR
    if "fail" in statuses:
        return EXIT_FAIL
    return EXIT_PASS


def _report_files(report_dir: Path, missing: List[str]) -> List[Path]:
    index = report_dir / INDEX_FILE
    if not index.exists():
        return sorted(
            p for p in report_dir.glob("*.json") if p.name not in (INDEX_FILE, MANIFEST_FILE)
        )
    files = []
    for entry in json.loads(index.read_text()):
        file = report_dir / f"{entry['name']}.json"
        if file.exists():
            files.append(file)
        elif entry["status"] != "error":
            missing.append(file.name)
    return files


def emit_plot_data(report_dir: Union[str, Path], out_dir: Union[str, Path]) -> Dict[str, Any]:
    """
    Tidy CSVs from a report directory: h estimates (level,value,stderr,method), creeping
    products, convergence distances and one row per reported statistic. Returns the
    bundle summary, which is also written as bundle.json.
    """
    report_dir, out_dir = Path(report_dir), Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    missing: List[str] = []
    written: List[str] = []
    if not report_dir.is_dir():
        missing.append(str(report_dir))

    for file in sorted(report_dir.glob("h-*.csv")):
        h_est = HarmonicEstimate.from_csv(file)
        target = out_dir / f"h_{file.stem[len('h-') :]}.csv"
        write_table_csv(
            {
                "level": list(h_est.levels),
                "value": list(h_est.values),
                "stderr": list(h_est.stderr),
                "method": [h_est.method.tag] * len(h_est.levels),
            },
            target,
        )
        written.append(target.name)

    rows: Dict[str, List[Any]] = {"name": [], "check": [], "model": [], "key": [], "value": []}
    reports = _report_files(report_dir, missing) if report_dir.is_dir() else []
    for file in reports:
        try:
            report = TestReport.from_json(file.read_text())
        except (ValueError, TypeError, KeyError):
            missing.append(file.name)
            continue
        columns = {
            "creeping": CREEPING_COLUMNS,
            "weak-convergence": CONVERGENCE_COLUMNS,
            "sampler-agreement": CONVERGENCE_COLUMNS,
        }.get(report.test_name)
        if columns is not None:
            if all(c in report.table for c in columns):
                target = out_dir / f"{report.test_name}_{report.model_label}.csv"
                write_table_csv({c: report.table[c] for c in columns}, target)
                written.append(target.name)
            else:
                missing.append(f"{file.name}: table columns")
        values = {"statistic": report.statistic, "critical_value": report.critical_value}
        values.update(report.statistics)
        for key, value in values.items():
            rows["name"].append(file.stem)
            rows["check"].append(report.test_name)
            rows["model"].append(report.model_label)
            rows["key"].append(key)
            rows["value"].append(float(value))
    if rows["name"]:
        write_table_csv(rows, out_dir / STATISTICS_FILE)
        written.append(STATISTICS_FILE)

    if not written:
        logger.warning("no reports or h estimates in %s, the bundle is empty", report_dir)
    if missing:
        logger.warning("missing inputs: %s", ", ".join(missing))
    bundle = {"files": sorted(written), "missing": missing, "source": str(report_dir)}
    (out_dir / BUNDLE_FILE).write_text(json.dumps(bundle, sort_keys=True, indent=2) + "\n")
    return bundle


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        "seed": args.seed,
        "output_dir": args.output_dir,
        "workers": args.workers,
        "dt": args.dt,
        "n_paths": args.n_paths,
    }


def _load(args: argparse.Namespace) -> ExperimentConfig:
    if args.config is None:
        raise ConfigError("this command needs --config")
    return load_config(args.config).with_overrides(_overrides(args))


def _model(config: ExperimentConfig, label: Optional[str]) -> LevyModelSpec:
    if label is None:
        if len(config.models) != 1:
            raise ConfigError(f"choose a model with --model among {sorted(config.models)}")
        label = next(iter(config.models))
    if label not in config.models:
        raise ConfigError(f"unknown model {label!r}", config.filename)
    return config.models[label]


def _output_dir(config: ExperimentConfig) -> Path:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _load(args)
    spec = _model(config, args.model)
    settings = config.settings
    horizon = settings.horizon if args.horizon is None else args.horizon
    x0 = settings.x0 if args.x0 is None else args.x0
    seed = derive_seed(config.seed, f"simulate-{spec.label}")
    out = _output_dir(config)
    for i in range(args.count):
        path = simulate_path(spec, x0, settings.dt, horizon, named_rng(seed, f"path {i}"))
        write_path_csv(path, out / f"path-{spec.label}-{i}.csv")
    logger.info("wrote %d paths of %s to %s", args.count, spec.label, out)
    return EXIT_PASS


def cmd_estimate_h(args: argparse.Namespace) -> int:
    config = _load(args)
    spec = _model(config, args.model)
    settings = config.settings
    rng = named_rng(derive_seed(config.seed, f"estimate-h-{spec.label}"), args.method)
    h_est = None
    if args.closed_form:
        if h_closed_form(spec, 1.0) is not None:
            h_est = HarmonicEstimate.from_closed_form(spec, settings.levels, settings.dt)
        else:
            logger.warning("no closed form of h for %s, using %s", spec.label, args.method)
    if h_est is None and args.method == "ladder":
        h_est = estimate_h_ladder(
            spec,
            settings.levels,
            settings.dt,
            settings.n_paths,
            settings.ladder_cap,
            rng,
            config.workers,
        )
    elif h_est is None and args.method == "exit-ratio":
        barrier = max(settings.barrier, 10 * max(settings.levels))
        h_est = estimate_h_exit_grid(
            spec,
            settings.levels,
            barrier,
            settings.dt,
            settings.n_paths,
            rng,
            workers=config.workers,
        )
    elif h_est is None:
        epsilon = settings.epsilon if args.epsilon is None else args.epsilon
        h_est = estimate_h_exponential_clock(
            spec, settings.levels, epsilon, settings.dt, settings.n_paths, rng, config.workers
        )
    target = _output_dir(config) / f"h-{spec.label}.csv"
    h_est.to_csv(target)
    logger.info("wrote %s (%s)", target, h_est.method.tag)
    return EXIT_PASS


def cmd_condition_sample(args: argparse.Namespace) -> int:
    config = _load(args)
    spec = _model(config, args.model)
    settings = config.settings
    x0 = settings.x0 if args.x0 is None else args.x0
    seed = derive_seed(config.seed, f"condition-sample-{spec.label}")
    try:
        if args.barrier_level is not None:
            batch = sample_conditioned_barrier(
                spec,
                x0,
                args.barrier_level,
                settings.dt,
                args.count,
                seed,
                settings.max_rejections,
                config.workers,
            )
        else:
            cfg = ConditionedSampleConfig(
                x0,
                settings.epsilon if args.epsilon is None else args.epsilon,
                settings.dt,
                settings.horizon,
                settings.max_rejections,
                seed,
            )
            batch = sample_conditioned_many(spec, cfg, args.count, config.workers)
    except SamplerExhaustedError as e:
        logger.error(
            "%s after %d attempts (acceptance rate %.2e)", e.message, e.attempts, e.acceptance_rate
        )
        return EXIT_ERROR
    out = _output_dir(config)
    files = []
    for i, path in enumerate(batch.paths):
        name = f"conditioned-{spec.label}-{i}.csv"
        write_path_csv(path, out / name)
        files.append(name)
    manifest = {"model": spec.label, "files": files, **batch.manifest()}
    if args.barrier_level is None:
        # positivity holds up to each path's clock, the rest is a free continuation
        manifest["clocks"] = [path.clock for path in batch.paths]
    (out / MANIFEST_FILE).write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return EXIT_PASS


def cmd_entrance_sample(args: argparse.Namespace) -> int:
    config = _load(args)
    spec = _model(config, args.model)
    rng = named_rng(derive_seed(config.seed, f"entrance-sample-{spec.label}"), "entrance")
    draws = np.atleast_1d(sample_entrance_law(spec, rng, args.count))
    write_table_csv({"value": list(draws)}, _output_dir(config) / f"entrance-{spec.label}.csv")
    return EXIT_PASS


def cmd_verify(args: argparse.Namespace) -> int:
    config = _load(args)
    only = None
    if args.name != "all":
        check = Check.from_tag(args.name)
        only = [check]
        if all(c != check for c, _ in config.selection):
            # not selected in the file: run it on every model
            config.selection = [(check, label) for label in config.models]
    return run_suite(config, only)


def cmd_emit_plots(args: argparse.Namespace) -> int:
    out = args.output_dir or Path(args.reports) / "plots"
    emit_plot_data(args.reports, out)
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="levy-conditioned",
        description="Simulate Levy processes conditioned to stay positive and verify them",
    )
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging threshold",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="Experiment file")
    common.add_argument("--seed", type=int, help="Root seed (overrides [experiment] seed)")
    common.add_argument("--dt", type=float, help="Grid step")
    common.add_argument("--n-paths", type=int, help="Number of paths per estimate")
    common.add_argument("--output-dir", type=Path, help="Directory for written files")
    common.add_argument("--workers", type=int, help="Size of the process pool")

    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", parents=[common], help="Write raw paths")
    simulate.add_argument("--model", help="Model label")
    simulate.add_argument("--x0", type=float, help="Start point")
    simulate.add_argument("--horizon", type=float, help="Path length in time")
    simulate.add_argument("--count", type=int, default=1, help="Number of paths")
    simulate.set_defaults(func=cmd_simulate)

    estimate = commands.add_parser("estimate-h", parents=[common], help="Estimate h")
    estimate.add_argument("--model", help="Model label")
    estimate.add_argument("--method", choices=H_METHODS, default="ladder")
    estimate.add_argument(
        "--closed-form", action="store_true", help="Use the closed form when registered"
    )
    estimate.add_argument("--epsilon", type=float, help="Rate of the exponential clock")
    estimate.set_defaults(func=cmd_estimate_h)

    condition = commands.add_parser(
        "condition-sample", parents=[common], help="Sample paths conditioned to stay positive"
    )
    condition.add_argument("--model", help="Model label")
    condition.add_argument("--x0", type=float, help="Start point")
    condition.add_argument("--epsilon", type=float, help="Rate of the exponential clock")
    condition.add_argument("--count", type=int, default=1, help="Number of accepted paths")
    condition.add_argument(
        "--barrier-level", type=float, help="Condition on reaching this level first instead"
    )
    condition.set_defaults(func=cmd_condition_sample)

    entrance = commands.add_parser(
        "entrance-sample", parents=[common], help="Draw from the entrance law at 0"
    )
    entrance.add_argument("--model", help="Model label")
    entrance.add_argument("--count", type=int, default=1000, help="Number of draws")
    entrance.set_defaults(func=cmd_entrance_sample)

    verify = commands.add_parser("verify", parents=[common], help="Run named checks")
    verify.add_argument("name", choices=["all"] + Check.tags(), help="Check to run")
    verify.set_defaults(func=cmd_verify)

    emit = commands.add_parser("emit-plots", help="Collect tidy CSVs from reports")
    emit.add_argument("--reports", type=Path, required=True, help="Report directory")
    emit.add_argument("--output-dir", type=Path, help="Bundle directory")
    emit.set_defaults(func=cmd_emit_plots)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except LevyError as e:
        logger.error("%s", e.message)
        return EXIT_ERROR
    except ValueError as e:
        logger.error("%s", e)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
