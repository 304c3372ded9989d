"""Command-line entry point: ``rio-td {simulate,run,evaluate,montecarlo}``.

Exit codes: 0 success, 1 usage or configuration error, 2 I/O error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import io
from .config import FIELD_HELP, RunConfig
from .evaluation import AssociationError
from .pipeline import aggregate, evaluate, montecarlo, run_filter
from .simulator import simulate

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("rio_td")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _config_epilog() -> str:
    cfg = RunConfig()
    lines = ["configuration keys (flat 'key = value' file, '#' comments):"]
    for f in fields(cfg):
        lines.append(f"  {f.name} = {io._format_value(getattr(cfg, f.name))}\n      {FIELD_HELP[f.name]}")
    return "\n".join(lines)


def _load_config(path) -> RunConfig:
    if path is None:
        return RunConfig()
    if not Path(path).is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    return io.read_config(path)


def _require(path: Path) -> Path:
    if not path.is_file():
        raise FileNotFoundError(f"missing dataset file: {path}")
    return path


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_(seed=args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = simulate(cfg)
    io.write_imu(out / "imu.csv", data.imu)
    io.write_radar(out / "radar.csv", data.radar)
    io.write_trajectory(out / "groundtruth.csv", data.truth)
    io.write_config(out / "meta.cfg", cfg)
    print(f"wrote {len(data.imu)} IMU samples, {len(data.radar)} radar scans to {out}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load_config(args.config)
    if args.fixed_td is not None:
        cfg = cfg.with_(fixed_td=args.fixed_td)
    ds = Path(args.dataset_dir)
    imu = io.read_imu(_require(ds / "imu.csv"))
    radar = io.read_radar(_require(ds / "radar.csv"))
    truth = io.read_truth(ds / "groundtruth.csv") if (ds / "groundtruth.csv").is_file() else None
    if not imu:
        raise UsageError("dataset has no IMU samples")
    seed = cfg.seed if args.seed is None else args.seed
    res = run_filter(cfg, imu, radar, truth, seed=seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_trajectory(out / "trajectory.csv", res.trajectory)
    io.write_estimate_log(out / "estimate_log.csv", res.updates)
    io.write_config(out / "run.cfg", cfg)
    print(
        f"{len(res.updates)} updates, {len(res.filter.skipped)} skipped; "
        f"t_d = {res.td_final:+.4f} s (sigma {res.td_sigma:.4f} s)"
    )
    return EXIT_OK


def cmd_evaluate(args) -> int:
    est = io.read_truth(args.est_path)
    truth = io.read_truth(args.truth_path)
    row = {"sequence": args.sequence, **evaluate(est, truth, args.interval)}
    td, sig = float("nan"), float("nan")
    log_path = Path(args.log) if args.log else Path(args.est_path).with_name("estimate_log.csv")
    if log_path.is_file():
        entries = io.read_estimate_log(log_path)
        if len(entries):
            td, sig = float(entries[-1, 1]), float(entries[-1, 2])
    row["td_final_s"], row["td_sigma_s"] = td, sig
    io.write_metrics(args.out_path, [row])
    rpe = (
        "n/a (path too short)" if np.isnan(row["rpe_trans_m"])
        else f"{row['rpe_trans_m']:.4f} m / {row['rpe_rot_deg']:.3f} deg"
    )
    print(
        f"APE {row['ape_trans_m']:.4f} m / {row['ape_rot_deg']:.3f} deg, "
        f"RPE@{args.interval:g}m {rpe}, t_d {td:+.4f} s"
    )
    return EXIT_OK


def cmd_montecarlo(args) -> int:
    cfg = _load_config(args.config)
    if args.workers is not None:
        cfg = cfg.with_(workers=args.workers)
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    rows = montecarlo(cfg, args.trials, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ok = [r for r in rows if "error" not in r]
    io.write_metrics(out / "metrics.csv", ok)
    summary = aggregate(rows)
    with open(out / "summary.csv", "w") as f:
        f.write("key,value\n")
        for k, v in summary.items():
            f.write(f"{k},{io.fmt(v) if isinstance(v, float) else v}\n")
        for r in rows:
            if "error" in r:
                f.write(f"failed_{r['sequence']},{r['error'].replace(',', ';')}\n")
    print(
        f"{summary['n_success']}/{len(rows)} trials ok; t_d = {summary['td_final_s_mean']:+.4f} "
        f"+- {summary['td_final_s_std']:.4f} s; APE {summary['ape_trans_m_mean']:.4f} m"
    )
    return EXIT_OK if ok else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="rio-td",
        description="Radar-inertial odometry with online IMU-radar time-offset estimation.",
        epilog=_config_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="generate a synthetic dataset")
    s.add_argument("-c", "--config", help="configuration file (default: built-in defaults)")
    s.add_argument("out_dir")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("run", help="run the filter on a dataset directory")
    r.add_argument("-c", "--config")
    r.add_argument("dataset_dir")
    r.add_argument("out_dir")
    r.add_argument("--fixed-td", type=float, metavar="S", help="freeze the time offset at S seconds")
    r.add_argument("--seed", type=int, help="RANSAC seed (default: config seed)")
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("evaluate", help="APE/RPE of an estimate against ground truth")
    e.add_argument("est_path")
    e.add_argument("truth_path")
    e.add_argument("out_path")
    e.add_argument("--sequence", default="sequence")
    e.add_argument("--interval", type=float, default=10.0, help="RPE path interval [m]")
    e.add_argument("--log", help="estimate_log.csv for the t_d columns")
    e.set_defaults(func=cmd_evaluate)

    m = sub.add_parser("montecarlo", help="seeded simulate+run+evaluate trials")
    m.add_argument("-c", "--config")
    m.add_argument("out_dir")
    m.add_argument("--trials", type=int, default=100)
    m.add_argument("--seed", type=int, help="master seed (default: config seed)")
    m.add_argument("--workers", type=int)
    m.set_defaults(func=cmd_montecarlo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (UsageError, io.ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, io.ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (AssociationError, np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
