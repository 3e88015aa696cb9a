"""Command line front end.

Subcommands cover the full workflow: generate synthetic trials, calibrate
a count-to-wrench model, evaluate it on held-out logs, characterize and
compensate thermal drift, and fly the closed-loop contact missions.

Exit codes: 0 success, 2 usage, 3 data error, 4 model error, 5 simulation
fault.  All outputs are deterministic for a given seed.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys
from hashlib import sha256
from pathlib import Path

import numpy as np

from . import calibration, dataio, flight
from .calibration import CalibrationError
from .controller import SurfaceNotFoundError
from .dataio import LogFormatError, ScenarioRangeError
from .flight import SimulationFault
from .sensor_model import SensorParams, SensorRangeError, default_sensor_params

_SCENARIO_BUILDERS = {
    "full_range": dataio.full_range_scenario,
    "small_range": dataio.small_range_scenario,
}


def _child_seed(base: int, index: int) -> int:
    """Stable per-trial seed; independent of how many workers run."""
    return int(np.random.SeedSequence((base, index)).generate_state(1)[0])


def _load_sensor_params(path: str | None) -> SensorParams:
    if path is None:
        return default_sensor_params()
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise LogFormatError(f"cannot read sensor params {path}: {exc}") from exc
    return SensorParams.from_dict(data)


def _sha256_file(path: Path) -> str:
    return sha256(path.read_bytes()).hexdigest()


def _generate_one(scenario_dict: dict, params_dict: dict, out_path: str) -> tuple[str, str]:
    """Worker for parallel generation; module level so it pickles."""
    scenario = dataio.scenario_from_dict(scenario_dict)
    params = SensorParams.from_dict(params_dict)
    trial = dataio.generate_trial(scenario, params)
    dataio.write_log(trial, out_path)
    return Path(out_path).name, _sha256_file(Path(out_path))


def _resolve_out(args: argparse.Namespace) -> Path:
    """--out, falling back to the CAPFT_OUT environment variable."""
    if args.out is not None:
        return Path(args.out)
    env = os.environ.get("CAPFT_OUT")
    if not env:
        raise ValueError("--out is required (or set CAPFT_OUT)")
    return Path(env)


def cmd_generate(args: argparse.Namespace) -> int:
    if args.trials < 1:
        raise ValueError(f"--trials must be >= 1, got {args.trials}")
    params = _load_sensor_params(args.sensor_params)
    out_dir = _resolve_out(args)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.scenario_file is not None:
        base = dataio.scenario_from_dict(json.loads(Path(args.scenario_file).read_text()))
    else:
        base = _SCENARIO_BUILDERS[args.scenario](duration=args.duration, seed=args.seed)
    jobs = []
    for i in range(args.trials):
        sc = dataio.scenario_from_dict({**dataio.scenario_to_dict(base),
                                        "name": f"{base.name}_{i:02d}",
                                        "seed": _child_seed(args.seed, i)})
        jobs.append((dataio.scenario_to_dict(sc), params.to_dict(),
                     str(out_dir / f"trial_{i:02d}.csv")))
    tare_sc = dataio.no_load_scenario(seed=_child_seed(args.seed, args.trials))
    jobs.append((dataio.scenario_to_dict(tare_sc), params.to_dict(),
                 str(out_dir / "tare.csv")))
    if args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_generate_one, *zip(*((s, p, o) for s, p, o in jobs))))
    else:
        results = [_generate_one(s, p, o) for s, p, o in jobs]
    manifest = {
        "scenario": dataio.scenario_to_dict(base),
        "sensor_params_hash": params.hash(),
        "base_seed": args.seed,
        "trials": args.trials,
        "files": {name: digest for name, digest in sorted(results)},
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(results)} logs + manifest to {out_dir}")
    return 0


def _load_trial_dir(path: Path) -> tuple[list[dataio.Trial], dataio.Trial]:
    trial_files = sorted(path.glob("trial_*.csv"))
    if not trial_files:
        raise LogFormatError(f"no trial_*.csv files in {path}")
    tare_file = path / "tare.csv"
    if not tare_file.exists():
        raise LogFormatError(f"missing tare.csv in {path}")
    return [dataio.load_log(p) for p in trial_files], dataio.load_log(tare_file)


def cmd_calibrate(args: argparse.Namespace) -> int:
    trials, tare_trial = _load_trial_dir(Path(args.data))
    if len(trials) < 2:
        raise CalibrationError("need at least two trials (train + held-out test)")
    train, test = dataio.split(trials)
    baseline = calibration.tare(tare_trial.frames)
    frames = [f for t in train for f in t.frames]
    wrenches = [w for t in train for w in t.wrenches]
    modes = ("full", "shear_only") if args.mode == "both" else (args.mode,)
    report = {"axes": list(calibration.AXIS_NAMES), "test_trial": test.name, "modes": {}}
    for mode in modes:
        model = calibration.fit(frames, wrenches, baseline, mode=mode, ridge=args.ridge)
        out_path = Path(args.model)
        if args.mode == "both" and mode == "shear_only":
            out_path = out_path.with_name(out_path.stem + "_shear_only" + out_path.suffix)
        calibration.save_model(model, out_path)
        test_metrics = calibration.evaluate(model, test.frames, test.wrenches)
        print(f"fitted mode={model.mode} ridge={model.ridge:.3e} "
              f"on {len(frames)} samples, test trial {test.name!r}:")
        for line in test_metrics.summary_lines():
            print("  " + line)
        report["modes"][mode] = {
            "ridge": model.ridge,
            "train_rmse": list(model.train_rmse),
            "test_rmse": list(test_metrics.rmse),
            "test_r_squared": list(test_metrics.r_squared),
        }
    if args.report is not None:
        Path(args.report).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    model, _ = calibration.load_model(args.model)
    trial = dataio.load_log(args.log)
    metrics = calibration.evaluate(model, trial.frames, trial.wrenches)
    print(f"evaluated {args.log} ({len(trial)} samples):")
    for line in metrics.summary_lines():
        print("  " + line)
    if args.predictions is not None:
        header = "t," + ",".join(f"ref_{a}" for a in calibration.AXIS_NAMES) \
                 + "," + ",".join(f"pred_{a}" for a in calibration.AXIS_NAMES)
        lines = [header]
        for frame, w in zip(trial.frames, trial.wrenches):
            pred = calibration.predict(model, frame)
            cells = [repr(frame.timestamp)]
            cells += [repr(v) for v in w.as_tuple()]
            cells += [repr(v) for v in pred.as_tuple()]
            lines.append(",".join(cells))
        Path(args.predictions).write_text("\n".join(lines) + "\n", newline="\n")
    return 0


def _quick_model(params: SensorParams, seed: int) -> calibration.CalibrationModel:
    """Self-contained calibration used when no model file is supplied."""
    tare_trial = dataio.generate_trial(
        dataio.no_load_scenario(seed=_child_seed(seed, 100)), params)
    frames, wrenches = [], []
    for i in range(3):
        sc = dataio.full_range_scenario(name=f"cal_{i}", duration=10.0,
                                        seed=_child_seed(seed, 101 + i))
        trial = dataio.generate_trial(sc, params)
        frames.extend(trial.frames)
        wrenches.extend(trial.wrenches)
    baseline = calibration.tare(tare_trial.frames)
    return calibration.fit(frames, wrenches, baseline)


def cmd_temp_sweep(args: argparse.Namespace) -> int:
    params = _load_sensor_params(args.sensor_params)
    if args.model is not None:
        model, _ = calibration.load_model(args.model)
    else:
        model = _quick_model(params, args.seed)
    sweep = dataio.generate_trial(
        dataio.temp_sweep_scenario(seed=_child_seed(args.seed, 200),
                                   temp_start=args.temp_start, temp_end=args.temp_end),
        params)
    comp = calibration.fit_temp_baseline(sweep.frames, params.drift.reference_temp)
    counts_raw = np.array([f.counts for f in sweep.frames], dtype=float)
    counts_comp = calibration._counts_matrix_compensated(sweep.frames, comp)
    pred_raw = calibration._predict_matrix(model, counts_raw)
    pred_comp = calibration._predict_matrix(model, counts_comp)
    f_raw = np.linalg.norm(pred_raw[:3], axis=0)
    f_comp = np.linalg.norm(pred_comp[:3], axis=0)
    out_dir = _resolve_out(args)
    out_dir.mkdir(parents=True, exist_ok=True)
    calibration.save_model(model, out_dir / "model_with_comp.json", comp=comp)
    lines = ["t,T,f_err_raw,f_err_comp"]
    for frame, fr, fc in zip(sweep.frames, f_raw, f_comp):
        lines.append(f"{frame.timestamp!r},{frame.temperature!r},"
                     f"{float(fr)!r},{float(fc)!r}")
    (out_dir / "ablation.csv").write_text("\n".join(lines) + "\n", newline="\n")
    r2 = comp.r_squared
    print(f"baseline fit R^2 per channel: min {min(r2):.5f}, max {max(r2):.5f}")
    print(f"no-load |F| error over {args.temp_start:.1f}..{args.temp_end:.1f} degC: "
          f"raw max {f_raw.max():.3f} N, compensated max {f_comp.max():.3f} N")
    return 0


def cmd_fly(args: argparse.Namespace) -> int:
    params = _load_sensor_params(args.sensor_params)
    if args.config is not None:
        cfg = flight.config_from_dict(json.loads(Path(args.config).read_text()))
        if cfg.scenario != args.scenario:
            raise ValueError(f"config scenario {cfg.scenario!r} does not match "
                             f"requested {args.scenario!r}")
        cfg = flight.replace(cfg, seed=args.seed)
    else:
        cfg = flight.default_config(args.scenario, seed=args.seed)
    if args.bypass_sensor:
        stack = flight.SensingStack(params=params, model=None, bypass=True)
    else:
        if args.model is None:
            raise CalibrationError("sensor-in-the-loop flight requires --model")
        model, _ = calibration.load_model(args.model)
        stack = flight.SensingStack(params=params, model=model, bypass=False)
    rows, summary = flight.run_mission(cfg, stack)
    out_dir = _resolve_out(args)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "trace.csv").write_text(
        "\n".join(flight.rows_to_csv_lines(rows)) + "\n", newline="\n")
    if cfg.scenario == "track_sine":
        payload = {"scenario": cfg.scenario, "hold_entered": summary.hold_entered,
                   "hold_time": summary.hold_time, "rms_error": summary.rms_error,
                   "saturated": summary.saturated}
        print(f"hold {summary.hold_time:.1f}s, force tracking rms "
              f"{summary.rms_error:.3f} N, saturated={summary.saturated}")
    else:
        payload = {"scenario": cfg.scenario,
                   "residuals": list(summary.residuals),
                   "press_peaks": list(summary.press_peaks),
                   "payload_attached": summary.payload_attached,
                   "success": summary.success}
        res = ", ".join(f"{r:.3f}" for r in summary.residuals)
        print(f"residuals [{res}] N, presses {len(summary.press_peaks)}, "
              f"payload_attached={summary.payload_attached}, success={summary.success}")
    (out_dir / "summary.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_params(args: argparse.Namespace) -> int:
    params = default_sensor_params()
    if args.describe:
        print("sensor parameter file schema (JSON):")
        print("  pillars: youngs_modulus Pa, height m, radius m,")
        print("           ring_radii m list, ring_counts list")
        print("  geometry: nominal_gap m, quadrant_x/quadrant_y m (4 each),")
        print("            normal_electrode_area m^2, shear_overlap_area m^2,")
        print("            finger_pitch m, pillar_fill_fraction, eps_pillar, eps_air")
        print("  drift: alpha 1/degC and beta 1/degC^2 (12 each), reference_temp degC")
        print("  cdc: gain_counts_per_farad, noise_sigma_counts, lag_corner_hz or null")
        print("defaults below are illustrative, not measurements of a physical device:")
    print(json.dumps(params.to_dict(), indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="capft", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="simulate excitation trials to CSV logs")
    p.add_argument("--scenario", choices=sorted(_SCENARIO_BUILDERS), default="full_range")
    p.add_argument("--scenario-file", help="JSON scenario overriding --scenario")
    p.add_argument("--trials", type=int, default=11)
    p.add_argument("--duration", type=float, default=35.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--sensor-params", help="JSON sensor parameter file")
    p.add_argument("--out", help="output directory (default: $CAPFT_OUT)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("calibrate", help="fit a count-to-wrench model from logs")
    p.add_argument("data", help="directory with trial_*.csv and tare.csv")
    p.add_argument("--mode", choices=("full", "shear_only", "both"), default="full")
    p.add_argument("--ridge", type=float, default=None)
    p.add_argument("--model", required=True, help="output model JSON path")
    p.add_argument("--report", help="optional JSON metric report path")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("evaluate", help="score a model against a trial log")
    p.add_argument("log")
    p.add_argument("--model", required=True)
    p.add_argument("--predictions", help="optional predicted-vs-reference CSV path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("temp-sweep", help="characterize and compensate thermal drift")
    p.add_argument("--model", help="existing model JSON; a quick one is fitted if omitted")
    p.add_argument("--sensor-params")
    p.add_argument("--temp-start", type=float, default=20.0)
    p.add_argument("--temp-end", type=float, default=30.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output directory (default: $CAPFT_OUT)")
    p.set_defaults(func=cmd_temp_sweep)

    p = sub.add_parser("fly", help="closed-loop contact mission")
    p.add_argument("--scenario", choices=("track_sine", "deploy_package"), required=True)
    p.add_argument("--bypass-sensor", action="store_true",
                   help="feed true contact force to the controller")
    p.add_argument("--model", help="calibration model for sensor-in-the-loop flight")
    p.add_argument("--config", help="JSON simulation config")
    p.add_argument("--sensor-params")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output directory (default: $CAPFT_OUT)")
    p.set_defaults(func=cmd_fly)

    p = sub.add_parser("params", help="print the default sensor parameter file")
    p.add_argument("--describe", action="store_true", help="prefix with schema notes")
    p.set_defaults(func=cmd_params)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if not exc.code else 2
    try:
        return args.func(args)
    except (LogFormatError, ScenarioRangeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except CalibrationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (SimulationFault, SurfaceNotFoundError, SensorRangeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
