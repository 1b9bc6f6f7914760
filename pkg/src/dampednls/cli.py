"""Command line front end: run scenarios, verify runs, study convergence.

Exit codes: 0 for success (including a run that halts at a detected
blow-up, which is a legitimate outcome), 1 for a failed check or a run that
died of non-finite values, 2 for configuration or file-format problems.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .io import SnapshotFormatError, TraceFormatError
from .propagator import StatusKind
from .scenarios import (
    PRESETS,
    ConfigError,
    convergence_study,
    parse_config,
    preset_config,
    run_scenario,
    verify_run,
)

__all__ = ["main"]


def _load_config(source: str):
    if source in PRESETS:
        return preset_config(source)
    path = Path(source)
    if not path.exists():
        known = ", ".join(sorted(PRESETS))
        raise ConfigError(
            [f"'{source}' is neither a preset ({known}) nor an existing file"]
        )
    return parse_config(path.read_text(encoding="utf-8"))


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _load_config(args.scenario)
    traj, run_dir = run_scenario(cfg, args.output_root)
    final = traj.final_record
    print(f"run '{cfg.name}' finished: {traj.status.kind.value} "
          f"at t = {traj.status.time:.6g}")
    print(f"records: {len(traj.records)}   "
          f"mass {traj.records[0].mass:.6g} -> {final.mass:.6g}")
    print(f"output: {run_dir}")
    check = run_dir / "transform_check.txt"
    if check.exists():
        print(check.read_text(encoding="utf-8").strip())
    return 1 if traj.status.kind is StatusKind.NUMERICAL_FAILURE else 0


def _cmd_verify(args: argparse.Namespace) -> int:
    report = verify_run(args.run_dir)
    print(report.format_table())
    if report.all_passed:
        print("all checks passed")
        return 0
    failed = sum(1 for row in report.rows if not row.passed)
    print(f"{failed} check(s) FAILED")
    return 1


def _cmd_convergence(args: argparse.Namespace) -> int:
    cfg = _load_config(args.scenario)
    study = convergence_study(cfg, args.dts)
    print(study.format_table())
    return 0


def _cmd_list_presets(_: argparse.Namespace) -> int:
    width = max(len(name) for name in PRESETS)
    for name in sorted(PRESETS):
        description, _ = PRESETS[name]
        print(f"{name:{width}s}  {description}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dampednls",
        description="spectral simulator for the damped focusing Schrodinger model",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a preset or an INI config file")
    run.add_argument("scenario", help="preset name or path to a config file")
    run.add_argument("--output-root", default=None,
                     help="directory for run output (default: $DAMPEDNLS_OUTPUT_ROOT "
                          "or ./runs)")
    run.set_defaults(func=_cmd_run)

    verify = sub.add_parser("verify", help="re-check balance laws for a finished run")
    verify.add_argument("run_dir", help="run directory written by 'run'")
    verify.set_defaults(func=_cmd_verify)

    conv = sub.add_parser("convergence",
                          help="self-convergence study under halving dt")
    conv.add_argument("scenario", help="preset name or path to a config file")
    conv.add_argument("--dts", type=float, nargs="+", required=True,
                      help="time steps, each half the previous (at least 3)")
    conv.set_defaults(func=_cmd_convergence)

    lp = sub.add_parser("list-presets", help="list bundled scenario presets")
    lp.set_defaults(func=_cmd_list_presets)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SnapshotFormatError, TraceFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
