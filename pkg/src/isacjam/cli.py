"""Command-line interface.

Subcommands: design, detect, sweep-pd, eval-mui, compare-sidelobes,
validate-config. Exit codes: 0 success, 1 configuration/usage error,
2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .config import ConfigError, load_config
from .experiments import (
    emit_design,
    emit_detection,
    emit_mui_eval,
    emit_pd_sweep,
    emit_sidelobe_compare,
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); we map usage errors to 1
        raise _UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(
        prog="isacjam",
        description="Joint waveform/filter design and evaluation under repeater jamming.",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def common(p, scheme=True):
        p.add_argument("--config", required=True, help="path to the JSON experiment config")
        p.add_argument("--seed", type=int, default=None, help="override the root seed (u64)")
        p.add_argument("--out", default=None, help="override the output directory")
        if scheme:
            p.add_argument("--scheme", choices=("jtmd", "jtmmd"), default=None,
                           help="override the configured design scheme")

    p = sub.add_parser("design", help="run one design scheme and store waveform/filters")
    common(p)
    p = sub.add_parser("detect", help="load a stored design, simulate an echo, run CFAR")
    common(p)
    p.add_argument("--design", default=None,
                   help="path to a design .npz (default: <out>/design_<scheme>.npz)")
    p.add_argument("--snr-db", type=float, default=None,
                   help="set the sensing noise from this echo SNR instead of the config value")
    p = sub.add_parser("sweep-pd", help="Monte-Carlo detection probability over the SNR grid")
    common(p)
    p.add_argument("--workers", type=int, default=1, help="trial worker pool size")
    p = sub.add_parser("eval-mui", help="per-channel-draw multiuser interference evaluation")
    common(p)
    p = sub.add_parser("compare-sidelobes", help="lobe levels of both schemes plus the chirp baseline")
    common(p, scheme=False)
    p = sub.add_parser("validate-config", help="parse, validate and print the normalized config")
    common(p, scheme=False)
    return parser


def _load(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be nonnegative")
        cfg.root_seed = args.seed
        cfg.normalized["evaluation"]["root_seed"] = args.seed
    if getattr(args, "scheme", None):
        cfg.scheme = args.scheme
        cfg.normalized["design"]["scheme"] = args.scheme
    if args.out is not None:
        cfg.output_dir = args.out
        cfg.normalized["output_dir"] = args.out
    return cfg


def _dispatch(args) -> int:
    cfg = _load(args)
    out = cfg.output_dir
    if args.command == "validate-config":
        print(json.dumps(cfg.normalized, indent=2, sort_keys=True))
        return 0
    if args.command == "design":
        result = emit_design(cfg, out)
        status = "converged" if result.converged else "budget exhausted"
        print(f"{cfg.scheme}: {result.iterations_run} iterations ({status}), "
              f"output in {out}")
        return 0
    if args.command == "detect":
        design_path = args.design or os.path.join(out, f"design_{cfg.scheme}.npz")
        if not os.path.exists(design_path):
            raise ConfigError(f"design file not found: {design_path}")
        stored = np.load(design_path)
        report = emit_detection(cfg, out, stored["x"], stored["filters"],
                                cfg.scheme, snr_db=args.snr_db)
        print(f"{report.n_targets_est} target(s) detected, report in {out}")
        return 0
    if args.command == "sweep-pd":
        sweep = emit_pd_sweep(cfg, out, workers=args.workers)
        for row in sweep.rows:
            print(f"snr {row['snr_db']:+.1f} dB: pd = {row['pd']:.3f}")
        return 0
    if args.command == "eval-mui":
        rows, summary, failed = emit_mui_eval(cfg, out)
        for stat, frob, frob_sq, per_symbol in summary:
            print(f"{stat}: per-symbol MUI = {per_symbol:.3e}")
        if failed:
            print(f"{len(failed)} trial(s) failed and were excluded: {failed}")
        return 0
    if args.command == "compare-sidelobes":
        rows = emit_sidelobe_compare(cfg, out)
        for label, angle, _, _, ratio in rows:
            print(f"{label} angle {angle}: mainlobe/PSL = {ratio:.1f} dB")
        return 0
    raise _UsageError("a subcommand is required")


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise _UsageError("a subcommand is required")
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return _dispatch(args)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
