"""Command-line entry point: ``qseal simulate|monitor|estimate|roc``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys

from qseal.config import ConfigError, load_config
from qseal.decision import DecisionConfig, detection_stats, roc_table, threshold_for_far, write_roc_csv
from qseal.estimator import KappaTotals, estimate_correlation
from qseal.photonics import ValidationError


def _nonneg(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not math.isfinite(v) or v < 0:
        raise argparse.ArgumentTypeError(f"must be a finite non-negative number, got {text}")
    return v


def _run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="run configuration (JSON)")
    p.add_argument("--host", help="override wire.host")
    p.add_argument("--port", type=int, help="override wire.port")
    p.add_argument("--windows", type=int, help="override wire.n_windows")
    p.add_argument("--seed", type=int, help="override source.seed")


def _load(args):
    return load_config(
        args.config,
        wire__host=args.host,
        wire__port=args.port,
        wire__n_windows=args.windows,
        source__seed=args.seed,
        **({"output__alarm_log": args.alarm_log} if getattr(args, "alarm_log", None) else {}),
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qseal", description="Entanglement-based tamper seal simulator and monitor")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the detector node and stream packets")
    _run_args(p)

    p = sub.add_parser("monitor", help="receive packets, estimate and decide per window")
    _run_args(p)
    p.add_argument("--alarm-log", help="override output.alarm_log")

    p = sub.add_parser("estimate", help="posterior mean and spread of the correlation from coincidence totals")
    for name in ("ksd", "kss", "kds", "kdd"):
        p.add_argument(f"--{name}", type=_nonneg, default=0.0)

    p = sub.add_parser("roc", help="write the ROC curve as CSV")
    p.add_argument("--e0", type=float, default=0.5)
    p.add_argument("--e1", type=float, default=0.8)
    p.add_argument("--sigma", type=float, default=0.03)
    p.add_argument("--points", type=int, default=201)
    p.add_argument("--far", type=float, default=1e-9, help="false-alarm rate of the printed operating point")
    p.add_argument("--out", required=True)
    return parser


def cmd_estimate(args) -> int:
    est = estimate_correlation(KappaTotals(args.ksd, args.kss, args.kds, args.kdd))
    print(f"e_kappa {est.e_kappa:.12g}")
    print(f"sigma_kappa {est.sigma_kappa:.12g}")
    return 0


def cmd_roc(args) -> int:
    try:
        cfg = DecisionConfig(epsilon=None, e0=args.e0, e1=args.e1, sigma=args.sigma)
    except ValidationError as exc:
        raise SystemExit(f"qseal roc: {exc}")
    try:
        write_roc_csv(args.out, roc_table(cfg, args.points))
    except OSError as exc:
        print(f"qseal roc: cannot write {args.out}: {exc.strerror or exc}", file=sys.stderr)
        return 1
    eps = threshold_for_far(cfg.e1, cfg.sigma, args.far)
    p_d, p_far, _ = detection_stats(cfg, eps)
    print(json.dumps({"epsilon": eps, "p_far": p_far, "p_d": p_d}))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)

    if args.command == "estimate":
        return cmd_estimate(args)
    if args.command == "roc":
        return cmd_roc(args)

    from qseal.node import run_monitor, run_source

    try:
        cfg = _load(args)
    except (OSError, ConfigError, json.JSONDecodeError) as exc:
        parser.error(str(exc))
    if args.command == "simulate":
        return run_source(cfg)
    return run_monitor(cfg)


if __name__ == "__main__":
    sys.exit(main())
