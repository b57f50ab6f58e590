#!/usr/bin/env python3
# Copyright 2024 Canonical Ltd.
# See LICENSE file for licensing details.

"""Command-line surface of the video popularity model.

Every subcommand that writes files writes them into ``--out`` together with a run manifest,
from which the ``rerun`` subcommand reproduces the outputs byte for byte.
"""

import argparse
import dataclasses
import json
import logging
import pathlib
import sys
import typing

import numpy as np
import pandas as pd
import scipy

import fitting
import metrics
import model_core
import reaction
import stochastic_sim
from exceptions import (
    HorizonTooShortError,
    InvalidParameterError,
    PopularityError,
    ReproducibilityError,
    UsageError,
)
from popularity_types import FitResult, ModelParams, TimeGrid, ViewTrace
from trace_io import (
    file_digest,
    finite_or_none,
    read_traces,
    to_json,
    write_frame_csv,
    write_json,
)

logger = logging.getLogger(__name__)

TOOL_VERSION = "1.0.0"
MANIFEST_NAME = "manifest.json"
TRAJECTORY_CSV = "trajectory.csv"
SUMMARY_JSON = "summary.json"
CLASSIFICATION_JSON = "classification.json"
AGGREGATE_CSV = "aggregate.csv"
FITS_JSONL = "fits.jsonl"
CURVES_CSV = "curves.csv"
ENTROPY_JSONL = "entropy.jsonl"
CDF_CSV = "cdf.csv"
SCATTER_CSV = "scatter.csv"
# ModelParams field -> command-line flag
PARAM_FLAGS = {"n_users": "n", "alpha": "alpha", "beta": "beta", "q": "q", "gamma": "gamma"}
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


class RunRecord(typing.NamedTuple):
    """What a subcommand resolved, read and wrote; the variable part of the run manifest.

    Attrs:
        params: the resolved model parameters or fit options.
        grid: the time grid or slot layout.
        seeds: the seeds of a stochastic run.
        rng: the random generator description.
        inputs: files read.
        outputs: files written.
    """

    params: typing.Optional[typing.Dict[str, typing.Any]] = None
    grid: typing.Optional[typing.Dict[str, typing.Any]] = None
    seeds: typing.Optional[typing.Dict[str, typing.Any]] = None
    rng: typing.Optional[typing.Dict[str, typing.Any]] = None
    inputs: typing.Tuple[pathlib.Path, ...] = ()
    outputs: typing.Tuple[pathlib.Path, ...] = ()


class _ArgumentParser(argparse.ArgumentParser):
    """Argument parser reporting usage errors as exceptions."""

    def error(self, message: str) -> typing.NoReturn:
        """Raise instead of exiting.

        Args:
            message: the argparse error message.

        Raises:
            UsageError: always.
        """
        raise UsageError(f"{self.prog}: {message}")


def _load_params_file(path: pathlib.Path) -> typing.Dict[str, float]:
    """Decode a JSON parameter file.

    Args:
        path: the file.

    Returns:
        The parameter values keyed by ModelParams field name.

    Raises:
        InvalidParameterError: when the file is unreadable, not a JSON object, or holds an
            unknown key or a non-numeric value.
    """
    try:
        values = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise InvalidParameterError("params", f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidParameterError("params", f"invalid {path}, expecting JSON") from exc
    if not isinstance(values, dict):
        logger.error("Invalid parameter file content: %s", repr(values))
        raise InvalidParameterError("params", f"invalid {path}, expecting an object in JSON")
    for key, value in values.items():
        if key not in PARAM_FLAGS:
            raise InvalidParameterError(
                "params", f"unknown key {key!r}, expecting some of {sorted(PARAM_FLAGS)}"
            )
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise InvalidParameterError(key, f"must be a number, got {value!r}")
    return {key: float(value) for key, value in values.items()}


def _resolve_params(args: argparse.Namespace) -> ModelParams:
    """Merge preset, parameter file and flags; later sources win.

    Args:
        args: parsed arguments.

    Returns:
        The model parameters.

    Raises:
        InvalidParameterError: when a parameter is missing or invalid.
    """
    values: typing.Dict[str, float] = {}
    if args.preset:
        values.update(dataclasses.asdict(model_core.preset(args.preset)))
    if args.params:
        values.update(_load_params_file(args.params))
    for field in PARAM_FLAGS:
        if getattr(args, field) is not None:
            values[field] = getattr(args, field)
    for field, flag in PARAM_FLAGS.items():
        if field not in values:
            logger.error("Model parameter %s is not set", field)
            raise InvalidParameterError(field, f"missing, set --{flag}, --params or --preset")
    return ModelParams(**values)


def _output_dir(path: pathlib.Path) -> pathlib.Path:
    """Create the output directory.

    Args:
        path: the directory.

    Returns:
        The directory.

    Raises:
        PopularityError: when it cannot be created.
    """
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise PopularityError(f"cannot create output directory {path}: {exc}") from exc
    return path


def _spread_summary(params: ModelParams) -> typing.Dict[str, typing.Any]:
    """Describe the regime, critical times and stages of the spreading rate.

    Args:
        params: model parameters.

    Returns:
        JSON-ready summary.
    """
    regime = model_core.classify(params)
    critical = model_core.critical_times(params)
    return {
        "regime": regime.value,
        "family": regime.family.value,
        "t_prime": finite_or_none(critical.t_prime),
        "t_one": finite_or_none(critical.t_one),
        "t_two": finite_or_none(critical.t_two),
        "stages": [
            {
                "start": stage.start,
                "end": finite_or_none(stage.end),
                "increasing": stage.increasing,
                "convex": stage.convex,
            }
            for stage in model_core.stage_table(params)
        ],
    }


def _peak_summary(params: ModelParams, horizon: float) -> typing.Optional[typing.Dict[str, float]]:
    """Locate the peaks within the evaluated horizon.

    Args:
        params: model parameters.
        horizon: the last grid point.

    Returns:
        The peak report, or None when the horizon does not contain the view peak.
    """
    if horizon <= 0:
        return None
    try:
        report = reaction.find_peak(params, horizon)
    except HorizonTooShortError as exc:
        logger.warning("No peak report: %s", exc.message)
        return None
    return {
        "t_peak_dx": report.t_peak_dx,
        "t_peak_dw": report.t_peak_dw,
        "dw_max": report.dw_max,
        "delay": report.delay,
        "dt": report.dt,
    }


def cmd_eval(args: argparse.Namespace) -> RunRecord:
    """Evaluate the spreading and reaction processes on a grid.

    Args:
        args: parsed arguments.

    Returns:
        The run record.
    """
    params = _resolve_params(args)
    grid = TimeGrid(dt=args.dt, n_steps=args.steps)
    spread = model_core.sample_spread(params, grid)
    trajectory = reaction.solve_reaction(params, grid, stepper=args.stepper)
    frame = pd.DataFrame(
        {
            "t": spread.t,
            "x": spread.x,
            "y": spread.y,
            "s": spread.s,
            "dx": spread.dx,
            "z": trajectory.z,
            "w": trajectory.w,
            "dw": trajectory.dw,
        }
    )
    out = _output_dir(args.out)
    write_frame_csv(frame, out / TRAJECTORY_CSV)
    summary = _spread_summary(params)
    summary["peak"] = _peak_summary(params, grid.horizon)
    write_json(summary, out / SUMMARY_JSON)
    return RunRecord(
        params=dataclasses.asdict(params),
        grid={"dt": grid.dt, "n_steps": grid.n_steps, "stepper": args.stepper},
        outputs=(out / TRAJECTORY_CSV, out / SUMMARY_JSON),
    )


def cmd_classify(args: argparse.Namespace) -> typing.Optional[RunRecord]:
    """Print the regime and critical times of a parameter set.

    Args:
        args: parsed arguments.

    Returns:
        The run record when an output directory was given.
    """
    params = _resolve_params(args)
    summary = _spread_summary(params)
    print(to_json(summary))
    if args.out is None:
        return None
    out = _output_dir(args.out)
    write_json(summary, out / CLASSIFICATION_JSON)
    return RunRecord(params=dataclasses.asdict(params), outputs=(out / CLASSIFICATION_JSON,))


def cmd_simulate(args: argparse.Namespace) -> RunRecord:
    """Run the stochastic simulator and write every run and the aggregate.

    Args:
        args: parsed arguments.

    Returns:
        The run record.
    """
    params = _resolve_params(args)
    config = stochastic_sim.SimConfig(
        params=params,
        n_slots=args.slots,
        seed=args.seed,
        n_runs=args.runs,
        dt_slot=args.dt_slot,
        exact_probabilities=not args.linear_probabilities,
    )
    traces = stochastic_sim.simulate(config, workers=args.workers)
    out = _output_dir(args.out)
    outputs = []
    for trace in traces:
        path = out / f"run_{trace.run_index:04d}.csv"
        write_frame_csv(trace.to_frame(), path)
        outputs.append(path)
    write_frame_csv(stochastic_sim.aggregate(traces).to_frame(), out / AGGREGATE_CSV)
    outputs.append(out / AGGREGATE_CSV)
    return RunRecord(
        params=dataclasses.asdict(params),
        grid={"n_slots": config.n_slots, "dt_slot": config.dt_slot},
        seeds={"seed": config.seed, "n_runs": config.n_runs},
        rng={
            "algorithm": stochastic_sim.RNG_ALGORITHM,
            "numpy": np.__version__,
            "exact_probabilities": config.exact_probabilities,
        },
        outputs=tuple(outputs),
    )


def _curves_frame(
    results: typing.Sequence[FitResult],
    traces: typing.Sequence[ViewTrace],
    normalize: bool,
    stepper: str,
) -> pd.DataFrame:
    """Tabulate observed and fitted daily views of every trace.

    Args:
        results: fit results sorted by video_id.
        traces: traces sorted by video_id.
        normalize: add peak-normalized columns.
        stepper: reaction integrator.

    Returns:
        Columns video_id, day, observed, fitted and optionally their normalized versions.
    """
    frames = []
    for result, trace in zip(results, traces):
        observed = trace.as_array()
        fitted = fitting.fitted_curve(result, len(observed), stepper=stepper)
        frame = pd.DataFrame(
            {
                "video_id": result.video_id,
                "day": np.arange(len(observed)),
                "observed": observed,
                "fitted": fitted,
            }
        )
        if normalize:
            frame["observed_normalized"] = fitting.normalize_peak(trace)
            fitted_peak = float(np.max(fitted))
            frame["fitted_normalized"] = fitted / fitted_peak if fitted_peak > 0 else fitted
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def cmd_fit(args: argparse.Namespace) -> RunRecord:
    """Fit every trace of a file or directory and write results and fitted curves.

    Args:
        args: parsed arguments.

    Returns:
        The run record.
    """
    traces = read_traces(args.traces)
    options = fitting.FitOptions(
        multistart_levels=args.levels,
        max_evals_per_start=args.max_evals,
        views_per_user=args.views_per_user,
        stepper=args.stepper,
    )
    results = fitting.fit_corpus(traces, options, workers=args.workers)
    out = _output_dir(args.out)
    lines = []
    for result in results:
        record = result.to_json_dict()
        record["regime"] = fitting.classify_trace(result).value
        lines.append(to_json(record))
    (out / FITS_JSONL).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    write_frame_csv(
        _curves_frame(results, traces, args.normalize, args.stepper), out / CURVES_CSV
    )
    return RunRecord(
        params=dataclasses.asdict(options),
        inputs=(args.traces,),
        outputs=(out / FITS_JSONL, out / CURVES_CSV),
    )


def cmd_entropy(args: argparse.Namespace) -> RunRecord:
    """Compute the normalized entropy of every trace and the corpus summary.

    Args:
        args: parsed arguments.

    Returns:
        The run record.
    """
    traces = read_traces(args.traces)
    reports = metrics.entropy_corpus(traces, args.window, skip_invalid=args.skip_invalid)
    summary = metrics.corpus_summary(reports)
    out = _output_dir(args.out)
    lines = "".join(to_json(report._asdict()) + "\n" for report in reports)
    (out / ENTROPY_JSONL).write_text(lines, encoding="utf-8")
    write_frame_csv(pd.DataFrame(summary.cdf, columns=["entropy", "fraction"]), out / CDF_CSV)
    write_frame_csv(
        pd.DataFrame(summary.scatter, columns=["video_id", "entropy", "total_views"]),
        out / SCATTER_CSV,
    )
    return RunRecord(
        params={"window_days": args.window, "skip_invalid": args.skip_invalid},
        inputs=(args.traces,),
        outputs=(out / ENTROPY_JSONL, out / CDF_CSV, out / SCATTER_CSV),
    )


def _input_digests(inputs: typing.Iterable[pathlib.Path]) -> typing.Dict[str, str]:
    """Digest every input file; a directory contributes each of its ``*.csv`` files.

    Args:
        inputs: input files or directories.

    Returns:
        sha256 digests keyed by path.
    """
    digests = {}
    for path in inputs:
        files = sorted(path.glob("*.csv")) if path.is_dir() else [path]
        for file_path in files:
            digests[str(file_path)] = file_digest(file_path)
    return digests


def write_manifest(
    subcommand: str, argv: typing.Sequence[str], record: RunRecord, out: pathlib.Path
) -> typing.Dict[str, typing.Any]:
    """Write the run manifest next to the outputs.

    Args:
        subcommand: the subcommand name.
        argv: the subcommand's command line.
        record: what the subcommand resolved, read and wrote.
        out: the output directory.

    Returns:
        The manifest.
    """
    manifest = {
        "subcommand": subcommand,
        "argv": list(argv),
        "params": record.params,
        "grid": record.grid,
        "seeds": record.seeds,
        "rng": record.rng,
        "tool_version": TOOL_VERSION,
        "library_versions": {
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "pandas": pd.__version__,
        },
        "input_digests": _input_digests(record.inputs),
        "output_digests": {
            str(path.relative_to(out)): file_digest(path) for path in record.outputs
        },
    }
    write_json(manifest, out / MANIFEST_NAME)
    return manifest


def _replace_out(argv: typing.Sequence[str], out: pathlib.Path) -> typing.List[str]:
    """Point a recorded command line at another output directory.

    Args:
        argv: the recorded command line.
        out: the new output directory.

    Returns:
        The command line writing into ``out``.
    """
    replaced = []
    tokens = iter(argv)
    for token in tokens:
        if token == "--out":
            next(tokens, None)
            replaced.extend(["--out", str(out)])
        elif token.startswith("--out="):
            replaced.append(f"--out={out}")
        else:
            replaced.append(token)
    return replaced


def _load_manifest(path: pathlib.Path) -> typing.Dict[str, typing.Any]:
    """Read a run manifest.

    Args:
        path: the manifest file.

    Returns:
        The manifest.

    Raises:
        InvalidParameterError: when the file is not a manifest.
    """
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise InvalidParameterError("manifest", f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidParameterError("manifest", f"invalid {path}, expecting JSON") from exc
    if not isinstance(manifest, dict) or not isinstance(manifest.get("argv"), list):
        raise InvalidParameterError("manifest", f"{path} holds no recorded command line")
    return manifest


def cmd_rerun(args: argparse.Namespace) -> None:
    """Re-execute the command line recorded in a manifest and compare the outputs.

    Args:
        args: parsed arguments.

    Raises:
        InvalidParameterError: when the manifest records no rerunnable subcommand.
        ReproducibilityError: when an output differs from its recorded digest.
    """
    manifest = _load_manifest(args.manifest)
    argv = [str(token) for token in manifest["argv"]]
    if args.out is not None:
        argv = _replace_out(argv, args.out)
    recorded_args = build_parser().parse_args(argv)
    if recorded_args.command == "rerun" or getattr(recorded_args, "out", None) is None:
        raise InvalidParameterError("manifest", "the recorded subcommand writes no outputs")
    record = recorded_args.handler(recorded_args)
    rerun_manifest = write_manifest(recorded_args.command, argv, record, recorded_args.out)
    for path, digest in manifest.get("input_digests", {}).items():
        if rerun_manifest["input_digests"].get(path) != digest:
            logger.warning("Input %s changed since the recorded run", path)
    expected = manifest.get("output_digests", {})
    mismatched = sorted(
        name
        for name in set(expected) | set(rerun_manifest["output_digests"])
        if expected.get(name) != rerun_manifest["output_digests"].get(name)
    )
    if mismatched:
        raise ReproducibilityError(f"outputs differ from the manifest: {', '.join(mismatched)}")
    logger.info("Rerun reproduced %d output(s)", len(expected))


def _add_model_options(parser: argparse.ArgumentParser) -> None:
    """Add the model parameter options.

    Args:
        parser: the subcommand parser.
    """
    parser.add_argument("--preset", help="reference parameter set, flags override it")
    parser.add_argument("--params", type=pathlib.Path, help="JSON object of model parameters")
    parser.add_argument("--n", dest="n_users", type=float, help="population size N")
    parser.add_argument("--alpha", type=float, help="direct-recommendation rate")
    parser.add_argument("--beta", type=float, help="word-of-mouth rate per intending viewer")
    parser.add_argument("--q", type=float, help="probability an informed user will watch")
    parser.add_argument("--gamma", type=float, help="reaction rate of intending viewers")


def build_parser() -> argparse.ArgumentParser:
    """Build the command-line parser.

    Returns:
        The parser; each subcommand stores its handler in ``handler``.
    """
    parser = _ArgumentParser(prog="popularity", description=__doc__)
    parser.add_argument("--log-level", choices=LOG_LEVELS, default="WARNING")
    subparsers = parser.add_subparsers(dest="command", required=True)

    eval_parser = subparsers.add_parser("eval", help="evaluate the model on a grid")
    _add_model_options(eval_parser)
    eval_parser.add_argument("--dt", type=float, default=1.0)
    eval_parser.add_argument("--steps", type=int, default=1000)
    eval_parser.add_argument("--stepper", choices=reaction.STEPPER_CHOICES, default="auto")
    eval_parser.add_argument("--out", type=pathlib.Path, required=True)
    eval_parser.set_defaults(handler=cmd_eval)

    classify_parser = subparsers.add_parser("classify", help="classify the spreading regime")
    _add_model_options(classify_parser)
    classify_parser.add_argument("--out", type=pathlib.Path)
    classify_parser.set_defaults(handler=cmd_classify)

    simulate_parser = subparsers.add_parser("simulate", help="run the stochastic simulator")
    _add_model_options(simulate_parser)
    simulate_parser.add_argument("--seed", type=int, required=True)
    simulate_parser.add_argument("--runs", type=int, default=1)
    simulate_parser.add_argument("--slots", type=int, required=True)
    simulate_parser.add_argument("--dt-slot", type=float, default=stochastic_sim.DEFAULT_DT_SLOT)
    simulate_parser.add_argument("--linear-probabilities", action="store_true")
    simulate_parser.add_argument("--workers", type=int, default=1)
    simulate_parser.add_argument("--out", type=pathlib.Path, required=True)
    simulate_parser.set_defaults(handler=cmd_simulate)

    defaults = fitting.FitOptions()
    fit_parser = subparsers.add_parser("fit", help="fit view traces")
    fit_parser.add_argument("traces", type=pathlib.Path, help="trace CSV file or directory")
    fit_parser.add_argument("--levels", type=int, default=defaults.multistart_levels)
    fit_parser.add_argument("--max-evals", type=int, default=defaults.max_evals_per_start)
    fit_parser.add_argument("--views-per-user", type=float, default=defaults.views_per_user)
    fit_parser.add_argument(
        "--stepper", choices=reaction.STEPPER_CHOICES, default=defaults.stepper
    )
    fit_parser.add_argument("--normalize", action="store_true")
    fit_parser.add_argument("--workers", type=int, default=1)
    fit_parser.add_argument("--out", type=pathlib.Path, required=True)
    fit_parser.set_defaults(handler=cmd_fit)

    entropy_parser = subparsers.add_parser("entropy", help="normalized view-count entropy")
    entropy_parser.add_argument("traces", type=pathlib.Path, help="trace CSV file or directory")
    entropy_parser.add_argument("--window", type=int, default=metrics.DEFAULT_WINDOW_DAYS)
    entropy_parser.add_argument("--skip-invalid", action="store_true")
    entropy_parser.add_argument("--out", type=pathlib.Path, required=True)
    entropy_parser.set_defaults(handler=cmd_entropy)

    rerun_parser = subparsers.add_parser("rerun", help="reproduce a run from its manifest")
    rerun_parser.add_argument("manifest", type=pathlib.Path)
    rerun_parser.add_argument("--out", type=pathlib.Path, help="write into another directory")
    rerun_parser.set_defaults(handler=cmd_rerun)
    return parser


def main(argv: typing.Optional[typing.Sequence[str]] = None) -> int:
    """Parse the command line and run the subcommand.

    Args:
        argv: the arguments, ``sys.argv[1:]`` when omitted.

    Returns:
        0 on success, 1 on a model or input error, 2 on a usage error.
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(
            level=args.log_level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
        )
        record = args.handler(args)
        if record is not None:
            subcommand_argv = argv[argv.index(args.command):]
            write_manifest(args.command, subcommand_argv, record, args.out)
    except UsageError as exc:
        print(exc.one_line(), file=sys.stderr)
        return 2
    except PopularityError as exc:
        print(exc.one_line(), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: nocover
    sys.exit(main())
