"""Command-line driver: run experiments from a config file, validate configs,
and print cost-model predictions.

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import ConfigError, load_config, write_report
from .costmodel import (
    adpsgd_epoch_time,
    fit_ssgd_cost,
    hybrid_epoch_time,
    min_breakeven_bandwidth,
    predict_speedup,
    ssgd_epoch_time,
)
from .harness import run_experiment

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def _verbose() -> bool:
    value = os.environ.get("DISTSGD_VERBOSE", "")
    return value not in ("", "0")


def _log(message: str) -> None:
    if _verbose():
        print(message, file=sys.stderr)


def _parse_factors(text: str) -> list[float]:
    try:
        factors = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad factor list {text!r}") from None
    if not factors:
        raise argparse.ArgumentTypeError("factor list is empty")
    return factors


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except FileNotFoundError:
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _log(f"running strategy={cfg.run.strategy} learners={cfg.run.learners} "
         f"epochs={cfg.run.epochs} clock={cfg.run.clock}")
    try:
        records = run_experiment(cfg.run)
    except Exception as exc:
        print(f"error: run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    target = write_report(records, cfg, args.output)
    _log(f"{len(records)} epochs -> {target}")
    for r in records:
        _log(f"  epoch {r.epoch}: heldout={r.heldout_loss:.6g} wall={r.epoch_wall_s:.4g}s")
    print(target)
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        load_config(args.config)
    except FileNotFoundError:
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{args.config}: ok")
    return EXIT_OK


def cmd_predict(args) -> int:
    try:
        if args.model == "breakeven":
            bandwidth = min_breakeven_bandwidth(args.model_mb * 1e6, args.compute_s)
            print("model_bytes,compute_s,breakeven_bytes_per_s")
            print(f"{args.model_mb * 1e6:.0f},{args.compute_s!r},{bandwidth!r}")
        elif args.model == "ssgd":
            compute, comm = fit_ssgd_cost(args.time_s1, args.time_s2)
            print("slowdown,epoch_time,model")
            for s in args.factors:
                print(f"{s:g},{ssgd_epoch_time(compute, comm, [s])!r},ssgd")
                print(f"{s:g},{hybrid_epoch_time(compute, comm, [s])!r},hybrid")
        elif args.model == "adpsgd":
            print("slowdown,epoch_time")
            for s in args.factors:
                slowdowns = [s] + [1.0] * (args.learners - 1)
                print(f"{s:g},{adpsgd_epoch_time(args.base_epoch, args.learners, slowdowns)!r}")
        else:  # speedup
            print("serial,parallel,speedup")
            print(f"{args.serial!r},{args.parallel!r},"
                  f"{predict_speedup(args.serial, args.parallel)!r}")
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="distsgd",
        description="Run and compare distributed SGD strategies at desk scale.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment from a config file")
    p_run.add_argument("config", help="path to the YAML run config")
    p_run.add_argument("--output", default=None, help="override the report output path")
    p_run.set_defaults(func=cmd_run)

    p_val = sub.add_parser("validate", help="parse a config file and report problems")
    p_val.add_argument("config")
    p_val.set_defaults(func=cmd_validate)

    p_pred = sub.add_parser("predict", help="print analytic cost-model tables as CSV")
    pred_sub = p_pred.add_subparsers(dest="model", required=True)

    p_be = pred_sub.add_parser("breakeven", help="bandwidth where allreduce time equals compute time")
    p_be.add_argument("--model-mb", type=float, required=True, help="model size in MB (decimal)")
    p_be.add_argument("--compute-s", type=float, required=True, help="per-batch compute seconds")
    p_be.set_defaults(func=cmd_predict)

    p_ssgd = pred_sub.add_parser("ssgd", help="synchronous epoch times from a two-point fit")
    p_ssgd.add_argument("--time-s1", type=float, required=True, help="epoch hours at slowdown 1")
    p_ssgd.add_argument("--time-s2", type=float, required=True, help="epoch hours at slowdown 2")
    p_ssgd.add_argument("--factors", type=_parse_factors, default=[1.0, 2.0, 10.0, 100.0])
    p_ssgd.set_defaults(func=cmd_predict)

    p_ad = pred_sub.add_parser("adpsgd", help="shared-pool epoch times under one straggler")
    p_ad.add_argument("--base-epoch", type=float, required=True, help="epoch time with no slowdown")
    p_ad.add_argument("--learners", type=int, required=True)
    p_ad.add_argument("--factors", type=_parse_factors, default=[1.0, 2.0, 10.0, 100.0])
    p_ad.set_defaults(func=cmd_predict)

    p_sp = pred_sub.add_parser("speedup", help="serial/parallel ratio")
    p_sp.add_argument("--serial", type=float, required=True)
    p_sp.add_argument("--parallel", type=float, required=True)
    p_sp.set_defaults(func=cmd_predict)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
