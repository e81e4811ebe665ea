"""Command-line entry point: ``stitchkit gen|estimate|plan|simulate|benchmark``."""

import argparse
from dataclasses import fields, replace
import math
from pathlib import Path
import sys

import numpy as np

from . import io
from .camera import CameraModel
from .errors import InvalidConfig, StitchError
from .geom3d import Pose, RansacConfig
from .harness import ABLATIONS, MeasurementCache, TrialConfig, aggregate, run_experiment
from .needle import EkfConfig, estimate_needle, measure_needle, refine_tip
from .planner import WoundScene, build_wound_model, plan_sutures
from .schema import SCENE_SCHEMA, TRIAL_SCHEMA, validate
from .synth import (
    DEFAULT_NEEDLE_RADIUS,
    NeedleGroundTruth,
    NoiseModel,
    WoundSceneParams,
    default_camera,
    generate_wound_scene,
    oracle_needle_state,
    render_views,
    sample_needle_cloud,
)

EXIT_CONFIG = 2


def _load_config(path, schema):
    if path is None:
        return {}
    try:
        cfg = io.read_json(path)
    except (OSError, ValueError) as exc:
        raise InvalidConfig(f"cannot read config {path}: {exc}") from None
    return validate(cfg, schema)


def _emit(obj, out):
    text = io.dumps(obj)
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


# gen
def cmd_gen(args):
    if not args.out:
        raise InvalidConfig("gen needs --out")
    cfg = _load_config(args.config, SCENE_SCHEMA)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ext = args.format

    cam = CameraModel.from_dict(cfg["camera"]) if "camera" in cfg else default_camera()
    ncfg = cfg.get("needle", {})
    pose = Pose(np.asarray(ncfg.get("position", [0.0, 0.0, 150.0]), dtype=float),
                np.asarray(ncfg.get("rotation", np.eye(3)), dtype=float))
    gt = NeedleGroundTruth(pose, ncfg.get("radius", DEFAULT_NEEDLE_RADIUS), ncfg.get("thread_side", "left"))
    noise = NoiseModel(**{**cfg.get("noise", {}), "seed": 0})
    n_clouds = args.clouds if args.clouds is not None else cfg.get("clouds", 10)
    points = cfg.get("points", 500)
    ss = np.random.SeedSequence(seed)
    cloud_seeds = ss.spawn(n_clouds + 2)
    names = []
    for k in range(n_clouds):
        cloud = sample_needle_cloud(gt, replace(noise, seed=int(cloud_seeds[k].generate_state(1)[0])), points)
        name = f"needle_{k:03d}.{ext}"
        io.write_cloud(out / name, cloud)
        names.append(name)

    render = {"pixel_thickness": 3, "depth_sigma": 1.0, "background_depth": pose.position[2] + 30.0,
              **cfg.get("render", {})}
    mask, depth = render_views(gt, cam, seed=int(cloud_seeds[n_clouds].generate_state(1)[0]), **render)
    io.write_pgm(out / "mask.pgm", mask)
    io.write_depth_csv(out / "depth.csv", np.where(depth == 0, np.nan, depth))
    io.write_json(out / "camera.json", cam.to_dict())

    wcfg = dict(cfg.get("wound", {}))
    wcfg.setdefault("rotation", np.diag([1.0, -1.0, -1.0]))
    wcfg.setdefault("translation", [0.0, 0.0, 170.0])
    wcfg = {k: (np.asarray(v, dtype=float) if k in ("rotation", "translation") else v) for k, v in wcfg.items()}
    params = WoundSceneParams(**wcfg, seed=int(cloud_seeds[n_clouds + 1].generate_state(1)[0]))
    scene, model = generate_wound_scene(params)
    for label, cloud in (("wound_center", scene.wound_center_cloud),
                         ("wound_surface", scene.wound_surface_cloud),
                         ("phantom", scene.phantom_cloud)):
        io.write_cloud(out / f"{label}.{ext}", cloud)

    truth = oracle_needle_state(gt, cam)
    oracle = {
        "seed": seed,
        "needle": {**truth.to_dict(), "tip": gt.tip_point.tolist(), "tip_side": gt.tip_label(cam),
                   "thread": gt.thread_point.tolist()},
        "needle_clouds": names,
        "wound": model.to_dict(),
    }
    io.write_json(out / "oracle.json", oracle)
    print(f"wrote {n_clouds} needle clouds, mask, depth and wound clouds to {out}")
    return 0


# estimate
def cmd_estimate(args):
    cam = CameraModel.from_dict(io.read_json(args.camera)) if args.camera else None
    ekf = EkfConfig(**io.read_json(args.ekf_config)) if args.ekf_config else EkfConfig()
    ransac = RansacConfig(iterations=args.iterations, seed=args.seed)
    measurements = []
    for k, path in enumerate(args.clouds):
        try:
            measurements.append(measure_needle(io.read_cloud(path), args.radius,
                                               replace(ransac, seed=args.seed + k), cam))
        except StitchError as exc:
            print(f"skipping {path}: {exc}", file=sys.stderr)
    if not measurements:
        raise StitchError("no usable needle measurement")
    if args.no_ekf:
        needle, consumed, accepted = measurements[0], 1, 1
    else:
        est = estimate_needle(measurements, ekf)
        needle, consumed, accepted = est.needle, est.consumed, est.accepted
    tip = needle.endpoint(args.tip_side)
    if args.depth:
        if cam is None:
            raise InvalidConfig("--depth needs --camera")
        depth = np.nan_to_num(io.read_depth_csv(args.depth), nan=0.0)
        tip = refine_tip(depth, cam, needle, args.tip_side)
    _emit({
        "center": needle.center, "endpoints": {"left": needle.endpoint_left, "right": needle.endpoint_right},
        "normal": needle.normal, "radius": needle.radius, "tip": tip, "tip_side": args.tip_side,
        "accepted_count": accepted, "consumed_count": consumed,
    }, args.out)
    return 0


# plan
def cmd_plan(args):
    ransac = RansacConfig(**io.read_json(args.ransac_config)) if args.ransac_config else RansacConfig()
    scene = WoundScene(io.read_cloud(args.center), io.read_cloud(args.surface), io.read_cloud(args.phantom))
    model = build_wound_model(scene, ransac)
    plan = plan_sutures(model, args.n, slack=args.slack)
    _emit(plan.to_dict(), args.out)
    return 0


# simulate
_SIM_FLAGS = ("grasp_tolerance", "insertion_height_tolerance", "alignment_tolerance_deg", "gripper_sigma",
              "tangle_prob_raw", "tangle_prob_swept", "alignment_snap_prob", "closure_miss_prob",
              "depth_sigma", "wound_sigma", "cloud_points", "ransac_iterations", "estimate_success_mm")


def build_trial_config(args):
    base = _load_config(args.config, TRIAL_SCHEMA)
    cfg = TrialConfig.from_dict(base)
    over = {name: getattr(args, name) for name in _SIM_FLAGS if getattr(args, name) is not None}
    if args.sutures is not None:
        over["n_sutures"] = args.sutures
    if args.noise_sigma is not None:
        over["noise"] = replace(cfg.noise, sigma=args.noise_sigma)
    cfg = replace(cfg, **over)
    flags = {"full": {}, "no-ekf": {"enable_ekf": False}, "no-thread": {"enable_thread_mgmt": False}}
    return replace(cfg, **flags[args.ablation])


def simulate_report(cfg, trials, seed, workers=1):
    results = run_experiment(cfg, trials, seed, MeasurementCache(), workers=workers)
    report = aggregate(results, cfg.n_sutures).to_dict()
    report["config"] = cfg.to_dict()
    report["seed"] = seed
    report["trials"] = [r.to_dict() for r in results]
    return report


def cmd_simulate(args):
    if args.trials < 1:
        raise InvalidConfig("--trials must be >= 1")
    cfg = build_trial_config(args)
    report = simulate_report(cfg, args.trials, args.seed, args.workers)
    _emit(report, args.out)
    if args.out not in (None, "-"):
        e = report["error_counts"]
        print(f"{args.ablation}: {report['avg_sutures']:.2f} +/- {report['std_sutures']:.2f} sutures, "
              f"closure {report['wound_gap_closure_rate']:.1f}%, "
              f"errors A={e['A']} T={e['T']} I={e['I']} M={e['M']}")
    return 0


# benchmark
def cmd_benchmark(args):
    from . import benchmark

    rows = benchmark.run(repeat=args.repeat, points=args.points, size=args.size)
    if args.out:
        io.write_json(args.out, rows)
    print(benchmark.format_table(rows))
    return 0


def _finite(kind):
    def parse(text):
        v = kind(text)
        if isinstance(v, float) and not math.isfinite(v):
            raise argparse.ArgumentTypeError(f"not a finite number: {text}")
        return v
    return parse


def build_parser():
    p = argparse.ArgumentParser(prog="stitchkit", description="Needle, wound and suturing-trial tools.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a synthetic scene bundle")
    g.add_argument("--out", help="output directory")
    g.add_argument("--config", help="scene config JSON")
    g.add_argument("--seed", type=int)
    g.add_argument("--clouds", type=int, help="number of needle clouds")
    g.add_argument("--format", choices=("csv", "ply"), default="csv")
    g.add_argument("--print-schema", action="store_true", help="print the scene config schema and exit")
    g.set_defaults(func=cmd_gen)

    e = sub.add_parser("estimate", help="estimate the needle pose from clouds")
    e.add_argument("clouds", nargs="+", help="needle clouds (.csv or .ply), in capture order")
    e.add_argument("--camera", help="camera JSON")
    e.add_argument("--ekf-config", help="EKF config JSON")
    e.add_argument("--radius", type=_finite(float), default=DEFAULT_NEEDLE_RADIUS)
    e.add_argument("--iterations", type=int, default=500, help="RANSAC iterations")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--no-ekf", action="store_true", help="use the first measurement only")
    e.add_argument("--depth", help="depth CSV grid for tip refinement")
    e.add_argument("--tip-side", choices=("left", "right"), default="right")
    e.add_argument("--out", help="output JSON (default stdout)")
    e.set_defaults(func=cmd_estimate)

    pl = sub.add_parser("plan", help="plan suture positions on a wound")
    pl.add_argument("--center", required=True, help="wound centre cloud")
    pl.add_argument("--surface", required=True, help="wound surface cloud")
    pl.add_argument("--phantom", required=True, help="phantom base cloud")
    pl.add_argument("--ransac-config", help="RANSAC config JSON")
    pl.add_argument("-n", type=int, default=6, help="number of sutures")
    pl.add_argument("--slack", type=_finite(float), default=5.0)
    pl.add_argument("--out", help="output JSON (default stdout)")
    pl.set_defaults(func=cmd_plan)

    s = sub.add_parser("simulate", help="run Monte-Carlo suturing trials")
    s.add_argument("--trials", type=int, default=15)
    s.add_argument("--sutures", type=int)
    s.add_argument("--seed", type=int, default=42, help="seed of the first trial")
    s.add_argument("--ablation", choices=ABLATIONS, default="full")
    s.add_argument("--config", help="trial config JSON")
    s.add_argument("--out", help="report JSON (default stdout)")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--noise-sigma", type=_finite(float))
    for f in fields(TrialConfig):
        if f.name in _SIM_FLAGS:
            kind = int if f.type in (int, "int") else float
            s.add_argument("--" + f.name.replace("_", "-"), dest=f.name, type=_finite(kind))
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("benchmark", help="time compiled vs fallback kernels")
    b.add_argument("--repeat", type=int, default=5)
    b.add_argument("--points", type=int, default=2000)
    b.add_argument("--size", type=int, default=200)
    b.add_argument("--out", help="write timings as JSON")
    b.set_defaults(func=cmd_benchmark)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "gen" and args.print_schema:
        sys.stdout.write(io.dumps(SCENE_SCHEMA))
        return 0
    try:
        return args.func(args)
    except InvalidConfig as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StitchError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (TypeError, ValueError) as exc:
        # bad values reaching a dataclass constructor are config errors too
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
