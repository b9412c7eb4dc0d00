"""Command-line entry point."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import shutil
import sys
from typing import List, Optional

from . import io
from .config import ConfigError, InterventionSpec, RunConfig, load_config
from .io import FormatError

LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
log = logging.getLogger("evosim")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _bool_flag(p, name: str, help: str) -> None:
    p.add_argument(f"--{name}", dest=name.replace("-", "_"), action=argparse.BooleanOptionalAction, default=None,
                   help=help)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="evosim", description="Event-driven multi-asset market simulator.")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="run configuration (YAML)")
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--backend", choices=["auto", "serial", "process"])
        p.add_argument("--cadence", type=float, help="snapshot cadence in seconds")
        _bool_flag(p, "async", "commit only at hard synchronization points")
        _bool_flag(p, "main-log", "write the main log")
        p.add_argument("--out", help="root directory for run outputs")
        p.add_argument("--force", action="store_true", help="overwrite an existing run directory")

    common(sub.add_parser("simulate", help="run a configured simulation"))
    p = sub.add_parser("replay", help="replay an order trace")
    common(p)
    p.add_argument("--trace", help="order trace to replay (overrides config)")
    p.add_argument("--initial-snapshot", help="snapshot file seeding each day's opening book")
    p = sub.add_parser("calibrate", help="run with online calibration against a reference")
    common(p)
    p.add_argument("--reference", help="reference snapshot log (overrides config)")
    p = sub.add_parser("event-study", help="step-jump event study")
    common(p)
    p.add_argument("--asset", type=int)
    p.add_argument("--event-time")
    p.add_argument("--magnitude", type=int)
    p.add_argument("--repeats", type=int, default=10)
    p = sub.add_parser("correlate", help="cross-asset correlation of a snapshot log")
    p.add_argument("--snapshots", required=True)
    p.add_argument("--bucket-s", type=float, default=60.0)
    p.add_argument("--output")
    p = sub.add_parser("bench", help="throughput at a grid of injection rates")
    p.add_argument("--rates", required=True, help="comma-separated orders/s per asset")
    p.add_argument("--duration", type=float, default=1.0)
    p.add_argument("--assets", type=int, default=1)
    p.add_argument("--workers", type=int, default=0)
    p.add_argument("--output")
    p = sub.add_parser("ablate", help="engine ablation table")
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--rate", type=float, default=40.0)
    p.add_argument("--duration", type=float, default=600.0)
    p.add_argument("--assets", type=int, default=4)
    p.add_argument("--output")
    return ap


def _effective(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    over = {}
    for flag, key in (("seed", "seed"), ("workers", "workers"), ("backend", "backend"),
                      ("cadence", "snapshot_cadence_s"), ("async", "async_commit"), ("main_log", "main_log")):
        v = getattr(args, flag, None)
        if v is not None:
            over[key] = v
    if getattr(args, "trace", None):
        over["replay"] = os.path.abspath(args.trace)
    if getattr(args, "initial_snapshot", None):
        over["initial_snapshot"] = os.path.abspath(args.initial_snapshot)
    if getattr(args, "reference", None):
        over["calibration"] = dataclasses.replace(cfg.calibration, reference=os.path.abspath(args.reference),
                                                  enabled=True)
    elif args.command == "calibrate":
        over["calibration"] = dataclasses.replace(cfg.calibration, enabled=True)
    cfg = dataclasses.replace(cfg, **over)
    cfg.validate(path=args.config)
    if args.command == "calibrate" and not cfg.calibration.reference:
        raise ConfigError("calibration: no reference file given", path=args.config)
    return cfg


def _run_dir(args, cfg: RunConfig) -> str:
    root = args.out or cfg.out_dir or "runs"
    d = os.path.join(root, f"{cfg.digest()}-s{cfg.seed}")
    if os.path.exists(d):
        if not args.force:
            raise FileExistsError(f"run directory {d} exists; pass --force to overwrite")
        shutil.rmtree(d)
    os.makedirs(d)
    return d


def _echo(cfg: RunConfig, d: Optional[str]) -> None:
    text = cfg.dump()
    print("# effective configuration")
    print(text, end="")
    sys.stdout.flush()
    if d:
        with open(os.path.join(d, "config.yaml"), "w") as f:
            f.write(text)


def _write(path: Optional[str], lines: List[str]) -> None:
    text = "\n".join(lines) + "\n"
    if path:
        with open(path, "w") as f:
            f.write(text)
    print(text, end="")


def cmd_simulate(args) -> int:
    from .sim import Simulation

    cfg = _effective(args)
    if args.command == "replay" and not cfg.replay:
        raise ConfigError("replay: no order trace given", path=args.config)
    if args.command == "replay":
        from .harness.replay import replay_config

        stream = cfg.replay
        cfg = dataclasses.replace(replay_config(cfg), replay=stream)
    d = _run_dir(args, cfg)
    _echo(cfg, d)
    r = Simulation(dataclasses.replace(cfg, out_dir=d)).run()
    print(f"run directory: {d}")
    print(f"processed_orders={r.processed_orders} trades={len(r.trades)} wall_clock_s={r.wall_clock_s:.3f}")
    if r.calibration:
        post = [c.post_norm for c in r.calibration]
        print(f"calibration checkpoints={len(post)} mean_post_gap={sum(post) / len(post):.4g}")
    return 0


def cmd_event_study(args) -> int:
    from .harness.event_study import event_study

    cfg = _effective(args)
    if cfg.interventions:
        iv = cfg.interventions[0]
    elif args.asset is None or args.event_time is None or args.magnitude is None:
        raise ConfigError("interventions: none configured; pass --asset, --event-time and --magnitude",
                          path=args.config)
    else:
        iv = InterventionSpec(args.asset, 1, args.event_time, args.magnitude)
    repl = {k: v for k, v in (("asset", args.asset), ("event_time", args.event_time),
                              ("magnitude", args.magnitude)) if v is not None}
    iv = dataclasses.replace(iv, **repl)
    d = _run_dir(args, cfg)
    _echo(cfg, d)
    res = event_study(cfg, iv, repeats=args.repeats)
    _write(os.path.join(d, "event_study.csv"), res.rows())
    for k, runs in res.runs.items():
        name = "up" if k > 0 else "down"
        with open(os.path.join(d, f"runs_{name}.csv"), "w") as f:
            for m in runs:
                f.write(",".join(f"{x:.6g}" for x in m) + "\n")
    print(f"prefix_identical={res.prefix_identical}")
    return 0


def cmd_correlate(args) -> int:
    from .harness.correlation import cross_asset_correlation

    snaps = io.read_snapshot_log(args.snapshots)
    res = cross_asset_correlation(snaps, bucket_s=args.bucket_s)
    lines = ["asset," + ",".join(map(str, res.assets))]
    for a, row in zip(res.assets, res.matrix):
        lines.append(f"{a}," + ",".join(f"{x:.6f}" for x in row))
    _write(args.output, lines)
    if res.flagged:
        print(f"zero-variance assets (undefined rows): {res.flagged}", file=sys.stderr)
    print(f"mean_abs_offdiag={res.mean_abs_offdiag():.6f}")
    return 0


def cmd_bench(args) -> int:
    from .harness.stress import bench

    try:
        rates = [float(x) for x in args.rates.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad --rates {args.rates!r}") from None
    reports = bench(rates, args.duration, args.assets, args.workers)
    lines = ["rate,assets,processed_orders,emitted_orders,rejected_orders,wall_clock_s,throughput,peak_memory_bytes"]
    for rate, r in zip(rates, reports):
        lines.append(f"{rate:g},{args.assets},{r.processed_orders},{r.emitted_orders},{r.rejected_orders},"
                     f"{r.wall_clock_s:.4f},{r.throughput:.1f},{r.peak_memory_bytes}")
    _write(args.output, lines)
    return 0


def cmd_ablate(args) -> int:
    from .harness.ablation import ablation_suite

    tab = ablation_suite(workers=args.workers, repeats=args.repeats, rate=args.rate, duration_s=args.duration,
                         assets=args.assets)
    _write(args.output, tab.rows())
    for k, ok in tab.checks().items():
        print(f"{k}={'yes' if ok else 'no'}")
    return 0


COMMANDS = {"simulate": cmd_simulate, "replay": cmd_simulate, "calibrate": cmd_simulate,
            "event-study": cmd_event_study, "correlate": cmd_correlate, "bench": cmd_bench, "ablate": cmd_ablate}


def main(argv: Optional[List[str]] = None) -> int:
    level = os.environ.get("EVOSIM_LOG_LEVEL", "warn").lower()
    logging.basicConfig(level=LEVELS.get(level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return 1
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, FormatError, UsageError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except FileExistsError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
