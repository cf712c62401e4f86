"""Command-line entry point: simulate, allan, tilt, extrinsics, apply-imu.

Exit codes: 0 success, 1 internal error, 2 bad input or unmet preconditions.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .allan import allan_deviation, check_uniform, fit_noise_params
from .config import NAMED_CONFIGS, CalibrationReport, Config
from .errors import CalibrationError, ConfigError, ParseError
from .extrinsic_opt import build_pose_pairs, solve, vio_path_to_F
from .formats import (
    read_imu_csv,
    read_json,
    read_tum,
    read_tum_planar,
    write_imu_csv,
    write_json,
    write_table_csv,
    write_tum,
)
from .imu_model import correct_accel, correct_gyro
from .pca_calib import TiltResult, calibrate_tilt
from .sim import ScenarioSpec, generate, standard_scenarios

AXES = ("gx", "gy", "gz", "ax", "ay", "az")


def load_config(name_or_path: str) -> Config:
    if name_or_path in NAMED_CONFIGS:
        return Config.from_dict(NAMED_CONFIGS[name_or_path]())
    return Config.from_dict(read_json(name_or_path))


def load_scenario(name_or_path: str) -> ScenarioSpec:
    scenarios = standard_scenarios()
    if name_or_path in scenarios:
        return scenarios[name_or_path]
    if not os.path.exists(name_or_path):
        raise ConfigError(f"unknown scenario {name_or_path!r}; shipped: {', '.join(sorted(scenarios))}")
    return ScenarioSpec.from_dict(read_json(name_or_path))


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    spec = load_scenario(args.scenario)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    if args.noiseless:
        spec = spec.noiseless()
    data = generate(spec)
    out = Path(args.out_dir)
    write_imu_csv(out / "imu.csv", data.imu.t, data.imu.gyro, data.imu.accel)
    write_tum(out / "odom_path.tum", data.odom_path)
    write_tum(out / "vio_path.tum", data.vio_path)
    write_json(out / "truth.json", {"params": data.truth["params"], "scenario": spec.to_dict()})
    return 0


def cmd_allan(args) -> int:
    t, gyro, accel = read_imu_csv(args.imu_csv)
    cols = np.column_stack([gyro, accel])
    if args.sample_rate is not None:
        rate = args.sample_rate
    else:
        if len(t) < 2:
            raise ParseError(f"{args.imu_csv}: need at least two samples")
        rate = (len(t) - 1) / (t[-1] - t[0])
    check_uniform(t, rate)
    axes = AXES if args.axis == "all" else (("gx", "gy", "gz") if args.axis == "gyro" else
                                            ("ax", "ay", "az") if args.axis == "accel" else (args.axis,))
    out = Path(args.out)
    fits = {}
    for name in axes:
        curve = allan_deviation(cols[:, AXES.index(name)], rate)
        write_table_csv(out / f"adev_{name}.csv", "tau,adev,n_clusters",
                        [(p.tau, p.adev, p.n_clusters) for p in curve])
        fits[name] = fit_noise_params(curve).to_dict()
    write_json(out / "allan_fit.json", {
        "sample_rate": rate,
        "n_samples": int(len(t)),
        "input": str(args.imu_csv),
        "axes": fits,
    })
    return 0


def cmd_tilt(args) -> int:
    cfg = load_config(args.config)
    cfg.require("mounting")
    t, gyro, accel = read_imu_csv(args.imu_csv)
    if "imu" in cfg.present:
        gyro = correct_gyro(gyro, cfg.imu)
    tcfg = cfg.tilt_config()
    if args.min_rate is not None:
        tcfg = replace(tcfg, min_rate=math.radians(args.min_rate))
    result = calibrate_tilt(t, gyro, tcfg)
    write_json(args.out, result.to_dict())
    return 0


def cmd_extrinsics(args) -> int:
    cfg = load_config(args.config)
    cfg.require("mounting")
    if args.zero_tilt:
        tilt = TiltResult.zero()
    elif args.tilt_json:
        tilt = TiltResult.from_dict(read_json(args.tilt_json))
    else:
        raise ConfigError("pass a tilt result (--tilt) or --zero-tilt")
    path_O = read_tum_planar(args.odom_tum)
    path_F = vio_path_to_F(read_tum(args.vio_tum), tilt, cfg.p_Bz_O)
    interval = args.interval if args.interval is not None else cfg.interval
    pairs = build_pose_pairs(path_F, path_O, interval)

    scfg = cfg.solver_config()
    if args.loss is not None:
        scfg = replace(scfg, loss=args.loss)
    if args.max_iters is not None:
        scfg = replace(scfg, max_iterations=args.max_iters)
    report = solve(pairs, scfg)

    lo = max(path_F.t[0], path_O.t[0])
    hi = min(path_F.t[-1], path_O.t[-1])
    full = CalibrationReport(tilt, report, {
        "inputs": {"vio": str(args.vio_tum), "odom": str(args.odom_tum),
                   "tilt": None if args.zero_tilt else str(args.tilt_json), "config": str(args.config)},
        "seed": args.seed,
        "data_time_window": [float(lo), float(hi)],
        "interval": interval,
        "n_pairs": len(pairs),
    })
    out = Path(args.out)
    write_json(out / "extrinsics.json", full.to_dict())
    t0 = np.array([p.t_start for p in pairs])
    t1 = np.array([p.t_end for p in pairs])
    write_table_csv(out / "residuals.csv", "t_start,t_end,r_x,r_y",
                    np.column_stack([t0, t1, report.residuals]))
    return 0


def cmd_apply_imu(args) -> int:
    cfg = load_config(args.config)
    cfg.require("imu")
    t, gyro, accel = read_imu_csv(args.imu_csv)
    write_imu_csv(args.out_csv, t, correct_gyro(gyro, cfg.imu), correct_accel(accel, cfg.imu))
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chassis-calib", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    p.add_argument("scenario", help="shipped scenario name or scenario JSON file")
    p.add_argument("out_dir")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--noiseless", action="store_true", help="switch every noise source off")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("allan", help="Allan deviation curves and noise fit")
    p.add_argument("imu_csv")
    p.add_argument("out", help="output directory")
    p.add_argument("--axis", default="gyro", choices=AXES + ("gyro", "accel", "all"))
    p.add_argument("--sample-rate", type=float, default=None, help="Hz; inferred from timestamps if omitted")
    p.set_defaults(func=cmd_allan)

    p = sub.add_parser("tilt", help="IMU pitch and roll relative to the chassis")
    p.add_argument("imu_csv")
    p.add_argument("config", help="config JSON file or a named config (bmi055)")
    p.add_argument("out", help="output TiltResult JSON")
    p.add_argument("--min-rate", type=float, default=None, help="deg/s admission threshold")
    p.set_defaults(func=cmd_tilt)

    p = sub.add_parser("extrinsics", help="planar lever arm, heading and chassis scales")
    p.add_argument("vio_tum")
    p.add_argument("odom_tum")
    p.add_argument("config")
    p.add_argument("out", help="output directory")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--tilt", dest="tilt_json", default=None, help="TiltResult JSON")
    g.add_argument("--zero-tilt", action="store_true")
    p.add_argument("--interval", type=float, default=None, help="pair interval, s")
    p.add_argument("--loss", choices=("huber", "none"), default=None)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--seed", type=int, default=None, help="recorded in the report provenance")
    p.set_defaults(func=cmd_extrinsics)

    p = sub.add_parser("apply-imu", help="apply IMU intrinsic corrections to a CSV stream")
    p.add_argument("imu_csv")
    p.add_argument("config")
    p.add_argument("out_csv")
    p.set_defaults(func=cmd_apply_imu)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CalibrationError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
