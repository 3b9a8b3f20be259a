"""
Command line for the big-bang regularization toolkit.

    bigbang <verb> [--params FILE] [--set KEY=VALUE] [--w P/Q] [--w-list LIST]
                   [--a0 X] [--a-stop X] [--direction toward|away] [--match-tau T]
                   [--out DIR] [--format json|csv] [--jobs N] [--suite NAME]

JSON and CSV results go to stdout; logs and the verify table go to stderr.
Exit codes: 0 ok, 2 usage, 3 domain obstruction, 4 numeric failure.
"""

import argparse
import io
import logging
import sys
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pandas as pd
from rich.console import Console

from bigbang.blowup import compare_terms, g_terms, g_tilde_terms, printed_g_terms, printed_g_tilde_terms
from bigbang.bounce import (approach_branch, asymptotic_form, extend_through_singularity, initial_state,
                            omega_branch_status)
from bigbang.cosmo import PARAM_KEYS, CosmologyParams, compare_printed_coefficients, reduce
from bigbang.exceptions import (EXIT_NUMERIC, EXIT_OK, BigBangError, IntegrationError, RejectedInputError,
                                UsageError)
from bigbang.flow import (Direction, IntegratorOptions, Trajectory, TrajectoryStatus, diagnostics_report,
                          handoff_state, integrate_physical, integrate_regularized, trajectory_frame)
from bigbang.ratnum import classify, format_rational, parse_rational
from bigbang.sweep import STATUS_FAILED, parse_w_list, run_sweep
from bigbang.verify import run_verify, suite_names
from utils.data_manager import CSV_FLOAT_FORMAT, DataManager, dumps_json
from utils.logger import LoggerManager, get_logger


logger = get_logger(__name__)


class Verb(Enum):
    CLASSIFY = "classify"
    REDUCE = "reduce"
    SIMULATE = "simulate"
    BOUNCE = "bounce"
    SWEEP = "sweep"
    VERIFY = "verify"


class OutputFormat(Enum):
    JSON = "json"
    CSV = "csv"


CSV_VERBS = (Verb.SIMULATE, Verb.SWEEP)

# Physical approaches that end in one of these continue in the regularized chart
HANDOFF_STATUSES = (TrajectoryStatus.STOP_EVENT, TrajectoryStatus.STEP_UNDERFLOW)


@dataclass(frozen=True)
class Command:
    """A validated invocation."""
    verb: Verb
    params_path: Optional[Path] = None
    overrides: Tuple[Tuple[str, str], ...] = ()
    output_dir: Optional[Path] = None
    format: OutputFormat = OutputFormat.JSON
    w: Optional[Fraction] = None
    w_list: Tuple[Fraction, ...] = ()
    a0: Optional[float] = None
    a_stop: Optional[float] = None
    direction: Optional[Direction] = None
    match_tau: Optional[float] = None
    jobs: Optional[int] = None
    suites: Tuple[str, ...] = field(default_factory=tuple)
    log_level: Optional[str] = None


@dataclass
class Outcome:
    """Text for stdout, artifacts written and the exit code."""
    stdout: str
    exit_code: int = EXIT_OK
    artifacts: List[Path] = field(default_factory=list)


class _ArgumentParser(argparse.ArgumentParser):
    """argparse that raises instead of exiting."""

    def error(self, message: str):
        raise UsageError(message, reason="bad-arguments")


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1: {text!r}")
    return value


def build_argparser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="bigbang",
                             description="Classify, reduce, integrate and continue big-bang singularities")
    parser.add_argument("verb", choices=[verb.value for verb in Verb], help="What to run")
    parser.add_argument("--params", help="Parameter JSON file (default: config/default_params.json)")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help=f"Override a parameter ({', '.join(PARAM_KEYS)}); repeatable")
    parser.add_argument("--w", help="Equation of state as an exact rational p/q")
    parser.add_argument("--w-list", help="Comma-separated equations of state for sweep")
    parser.add_argument("--a0", type=_positive_float, help="Initial scale factor")
    parser.add_argument("--a-stop", type=_positive_float,
                        help="Scale factor ending the physical run (simulate)")
    parser.add_argument("--direction", choices=[d.value for d in Direction],
                        help="Integrate toward or away from the singularity (simulate)")
    parser.add_argument("--match-tau", type=_positive_float,
                        help="Time after the singularity at which the continued branch is seeded (bounce)")
    parser.add_argument("--out", help="Directory for artifacts")
    parser.add_argument("--format", choices=[f.value for f in OutputFormat], default=OutputFormat.JSON.value,
                        help="Format of stdout (csv for simulate and sweep)")
    parser.add_argument("--jobs", type=_positive_int, help="Worker processes for sweep")
    parser.add_argument("--suite", dest="suites", action="append", default=[], choices=suite_names(),
                        help="Restrict verify to a suite; repeatable")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Logging level")
    return parser


def _parse_w(text: str) -> Fraction:
    try:
        return parse_rational(text)
    except RejectedInputError as e:
        raise UsageError(f"--w: {e}", reason=e.reason) from e


def _parse_override(item: str) -> Tuple[str, str]:
    key, sep, value = item.partition("=")
    key = key.strip()
    if not sep or key not in PARAM_KEYS:
        raise UsageError(f"--set expects KEY=VALUE with KEY in {', '.join(PARAM_KEYS)}, got {item!r}",
                         reason="bad-override")
    return key, value.strip()


def parse_command(argv: Sequence[str]) -> Command:
    """
    Parse and validate arguments.

    Raises:
        UsageError: unknown verb or flag, malformed rational, floating w,
            missing parameter file or a verb-specific flag missing
    """
    args = build_argparser().parse_args(list(argv))
    verb = Verb(args.verb)

    params_path = Path(args.params) if args.params else None
    if params_path is not None and not params_path.is_file():
        raise UsageError(f"Parameter file not found: {params_path}", reason="params-not-found")

    w = _parse_w(args.w) if args.w is not None else None
    w_list: Tuple[Fraction, ...] = ()
    if args.w_list is not None:
        try:
            w_list = tuple(parse_w_list(args.w_list))
        except RejectedInputError as e:
            raise UsageError(f"--w-list: {e}", reason=e.reason) from e

    output_format = OutputFormat(args.format)
    if output_format is OutputFormat.CSV and verb not in CSV_VERBS:
        raise UsageError(f"--format csv is not available for {verb.value}", reason="format-unsupported")

    if verb is Verb.SIMULATE and (args.a0 is None or args.direction is None):
        raise UsageError("simulate requires --a0 and --direction", reason="missing-flag")
    if verb is Verb.SWEEP and not w_list:
        raise UsageError("sweep requires --w-list", reason="missing-flag")

    return Command(
        verb=verb,
        params_path=params_path,
        overrides=tuple(_parse_override(item) for item in args.overrides),
        output_dir=Path(args.out) if args.out else None,
        format=output_format,
        w=w,
        w_list=w_list,
        a0=args.a0,
        a_stop=args.a_stop,
        direction=Direction(args.direction) if args.direction else None,
        match_tau=args.match_tau,
        jobs=args.jobs,
        suites=tuple(args.suites),
        log_level=args.log_level,
    )


def _w_tag(w: Fraction) -> str:
    return format_rational(w).replace("/", "-")


def _load_params(cmd: Command, data_manager: DataManager) -> CosmologyParams:
    params = data_manager.load_params(cmd.params_path)
    if not cmd.overrides and cmd.w is None:
        return params
    data: Dict[str, Any] = params.to_dict()
    for key, value in cmd.overrides:
        if key == "w":
            data[key] = value
            continue
        try:
            data[key] = float(value)
        except ValueError:
            raise UsageError(f"--set {key}: not a number: {value!r}", reason="bad-override")
    if cmd.w is not None:
        data["w"] = format_rational(cmd.w)
    return CosmologyParams.from_dict(data)


def _frame_csv(frame: pd.DataFrame) -> str:
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, float_format=CSV_FLOAT_FORMAT)
    return buffer.getvalue()


def _run_classify(cmd: Command, data_manager: DataManager) -> Outcome:
    w = cmd.w if cmd.w is not None else _load_params(cmd, data_manager).w
    return Outcome(dumps_json(classify(w).to_dict()))


def _run_reduce(cmd: Command, data_manager: DataManager) -> Outcome:
    params = _load_params(cmd, data_manager)
    model = reduce(params)
    form = asymptotic_form(params.w)
    report = {
        "params": params.to_dict(),
        "classification": classify(params.w).to_dict(),
        "model": model.to_dict(),
        "asymptotic_form": form.to_dict(),
        "omega_branches": omega_branch_status(form),
        "printed_coefficients": compare_printed_coefficients(params, model),
        "printed_energy_terms": compare_terms(printed_g_tilde_terms(params), g_tilde_terms(model)),
        "printed_field_terms": compare_terms(printed_g_terms(params), g_terms(model)),
    }
    return Outcome(dumps_json(report))


def _handoff_reason(physical: Trajectory, opts: IntegratorOptions) -> str:
    if physical.status is TrajectoryStatus.STEP_UNDERFLOW:
        return "step-underflow"
    if opts.stop_a_min is not None and physical.a[-1] <= opts.stop_a_min * (1.0 + 1e-9):
        return "scale-factor"
    return "time-left"


def _run_simulate(cmd: Command, data_manager: DataManager) -> Outcome:
    params = _load_params(cmd, data_manager)
    model = reduce(params)
    toward = cmd.direction is Direction.TOWARD
    init = initial_state(params, model, cmd.a0, sign=-1.0 if toward else 1.0)

    opts = IntegratorOptions.from_config(direction=cmd.direction)
    if toward:
        if cmd.a_stop is not None:
            opts = opts.with_(stop_a_min=cmd.a_stop)
        if not cmd.a0 > opts.stop_a_min:
            raise RejectedInputError(f"--a0 {cmd.a0} must exceed the stop scale factor {opts.stop_a_min}",
                                     reason="a0-below-floor")
    else:
        opts = opts.with_(stop_a_max=cmd.a_stop if cmd.a_stop is not None else 10.0 * cmd.a0)
        if not opts.stop_a_max > cmd.a0:
            raise RejectedInputError(f"--a-stop {opts.stop_a_max} must exceed --a0 {cmd.a0}",
                                     reason="a-stop-below-a0")

    physical = integrate_physical(model, init, opts)
    regularized = None
    handoff = None
    if toward and physical.status in HANDOFF_STATUSES and physical.p_mom[-1] < 0:
        handoff = _handoff_reason(physical, opts)
        logger.info(f"Handing off to the regularized chart at a={physical.a[-1]:.6g} ({handoff})")
        regularized = integrate_regularized(model, handoff_state(model, physical), physical.h_level, opts,
                                            tau0=float(physical.tau[-1]))

    tag = f"simulate_w{_w_tag(params.w)}_{cmd.direction.value}"
    artifacts = [data_manager.write_trajectory_csv(trajectory_frame(physical, model),
                                                   data_manager.resolve_output(f"{tag}_physical.csv",
                                                                               cmd.output_dir))]
    if regularized is not None:
        artifacts.append(data_manager.write_trajectory_csv(
            trajectory_frame(regularized, model),
            data_manager.resolve_output(f"{tag}_regularized.csv", cmd.output_dir)))

    runs = [physical] + ([regularized] if regularized is not None else [])
    report = {
        "params": params.to_dict(),
        "classification": classify(params.w).to_dict(),
        "initial_state": {"a": init.a, "P": init.p_mom},
        "physical": diagnostics_report(physical, model),
        "handoff": handoff,
        "regularized": diagnostics_report(regularized, model) if regularized is not None else None,
        "files": [path.name for path in artifacts],
    }
    artifacts.append(data_manager.write_json(report, data_manager.resolve_output(f"{tag}_diagnostics.json",
                                                                                 cmd.output_dir)))

    exit_code = EXIT_OK
    # a physical underflow that was handed off is not a failure
    truncated = [traj for traj in runs if traj.status.truncated and not (traj is physical and handoff)]
    if truncated:
        error = IntegrationError("; ".join(f"{t.chart.value} run ended early: {t.status.value}" for t in truncated),
                                 reason=truncated[0].status.value)
        sys.stderr.write(dumps_json({"error": error.to_dict()}))
        exit_code = error.exit_code

    stdout = _frame_csv(trajectory_frame(physical, model)) if cmd.format is OutputFormat.CSV else dumps_json(report)
    return Outcome(stdout, exit_code, artifacts)


def _run_bounce(cmd: Command, data_manager: DataManager) -> Outcome:
    params = _load_params(cmd, data_manager)
    model = reduce(params)
    cls = classify(params.w)
    opts = IntegratorOptions.from_config()
    pre = approach_branch(model, params, a0=cmd.a0, opts=opts)
    result = extend_through_singularity(model, cls, pre, match_tau=cmd.match_tau, opts=opts)

    tag = f"bounce_w{_w_tag(params.w)}"
    pre_frame, post_frame = result.frames(model)
    pre_path = data_manager.write_trajectory_csv(pre_frame,
                                                 data_manager.resolve_output(f"{tag}_pre.csv", cmd.output_dir))
    post_path = data_manager.write_trajectory_csv(post_frame,
                                                  data_manager.resolve_output(f"{tag}_post.csv", cmd.output_dir))
    report = result.to_dict(pre_csv=pre_path.name, post_csv=post_path.name)
    report["params"] = params.to_dict()
    json_path = data_manager.write_json(report, data_manager.resolve_output(f"{tag}.json", cmd.output_dir))
    return Outcome(dumps_json(report), EXIT_OK, [pre_path, post_path, json_path])


def _run_sweep(cmd: Command, data_manager: DataManager) -> Outcome:
    params = _load_params(cmd, data_manager)
    report = run_sweep(params, cmd.w_list, jobs=cmd.jobs)
    artifacts = []
    if cmd.output_dir is not None:
        artifacts.append(data_manager.write_json(report.to_dict(),
                                                 data_manager.resolve_output("sweep.json", cmd.output_dir)))
    if cmd.format is OutputFormat.CSV:
        stdout = _frame_csv(pd.DataFrame(list(report.rows)))
    else:
        stdout = dumps_json(report.to_dict())
    failed = any(row["status"] == STATUS_FAILED for row in report.rows)
    return Outcome(stdout, EXIT_NUMERIC if failed else EXIT_OK, artifacts)


def _run_verify(cmd: Command, data_manager: DataManager) -> Outcome:
    params = _load_params(cmd, data_manager)
    report = run_verify(params, suites=cmd.suites or None)
    report.render_table(Console(stderr=True))
    artifacts = []
    if cmd.output_dir is not None:
        artifacts.append(data_manager.write_json(report.to_dict(),
                                                 data_manager.resolve_output("verify.json", cmd.output_dir)))
    return Outcome(dumps_json(report.to_dict()), EXIT_OK if report.all_passed() else EXIT_NUMERIC, artifacts)


HANDLERS = {
    Verb.CLASSIFY: _run_classify,
    Verb.REDUCE: _run_reduce,
    Verb.SIMULATE: _run_simulate,
    Verb.BOUNCE: _run_bounce,
    Verb.SWEEP: _run_sweep,
    Verb.VERIFY: _run_verify,
}


def execute(cmd: Command, data_manager: Optional[DataManager] = None) -> Outcome:
    """
    Run a command.

    Raises:
        BigBangError: carrying the reason code and exit code of the failure
    """
    if cmd.log_level:
        LoggerManager.set_level(getattr(logging, cmd.log_level))
    data_manager = data_manager or DataManager(output_directory=cmd.output_dir)
    logger.debug(f"Executing {cmd.verb.value}")
    outcome = HANDLERS[cmd.verb](cmd, data_manager)
    for path in outcome.artifacts:
        logger.info(f"Wrote {path}")
    return outcome


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point; returns the process exit code."""
    argv = sys.argv[1:] if argv is None else argv
    try:
        outcome = execute(parse_command(argv))
    except BigBangError as e:
        logger.error(f"{type(e).__name__} [{e.reason}]: {e}")
        sys.stderr.write(dumps_json({"error": e.to_dict()}))
        return e.exit_code
    except Exception as e:
        logger.exception(f"Unexpected failure: {e}")
        sys.stderr.write(dumps_json({"error": {"error": type(e).__name__, "reason": "internal-error",
                                               "message": str(e)}}))
        return EXIT_NUMERIC
    sys.stdout.write(outcome.stdout)
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
