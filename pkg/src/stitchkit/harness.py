"""Monte-Carlo suturing trials and metric aggregation.

A trial plans a wound, then runs up to ``n_sutures`` cycles of
pre-insertion alignment, insertion, thread sweep, extraction with cinching
and handover. Each cycle can fail with one of four error kinds:

A  alignment left the needle misaligned with the wound
T  thread tangled or cross-stitched
I  tip at the wrong height for insertion
M  a grasp missed because the pose estimate was off

A trial stops at its first failure. All randomness derives from the trial
seed, and the random draws of a cycle never depend on earlier outcomes, so
two configurations run on the same seed see the same scenes.
"""

from dataclasses import asdict, dataclass, field, replace
import math

import numpy as np

from . import controller
from .errors import EmptyResults, EstimateTimeout, InvalidConfig, StitchError
from .geom3d import Pose, RansacConfig, rotation_about_axis, unit
from .needle import (
    EkfConfig,
    endpoint_errors,
    estimate_needle,
    measure_needle,
    refine_tip,
)
from .planner import build_wound_model, plan_sutures
from .synth import (
    NeedleGroundTruth,
    NoiseModel,
    WoundSceneParams,
    default_camera,
    generate_wound_scene,
    oracle_needle_state,
    render_views,
    sample_needle_cloud,
)

ERROR_KINDS = ("A", "T", "I", "M")
STAGES = ("pre_insertion", "extraction", "handover")
ABLATIONS = ("full", "no-ekf", "no-thread")


@dataclass(frozen=True)
class ErrorEvent:
    kind: str
    suture_index: int
    detail: str = ""

    def __post_init__(self):
        if self.kind not in ERROR_KINDS:
            raise ValueError(f"error kind must be one of {ERROR_KINDS}, got {self.kind!r}")


@dataclass(frozen=True)
class TrialConfig:
    """Simulation settings. Failure parameters are calibrated, not measured."""

    n_sutures: int = 6
    enable_ekf: bool = True
    enable_thread_mgmt: bool = True
    enable_alignment: bool = True
    noise: NoiseModel = field(default_factory=NoiseModel)
    cloud_points: int = 300
    ransac_iterations: int = 120
    depth_sigma: float = 1.0
    wound_sigma: float = 0.2
    grasp_tolerance: float = 2.5
    insertion_height_tolerance: float = 1.0
    alignment_tolerance_deg: float = 5.0
    gripper_sigma: float = 0.25
    tangle_prob_raw: float = 0.2
    tangle_prob_swept: float = 0.05
    alignment_snap_prob: float = 0.1
    closure_miss_prob: float = 0.08
    estimate_success_mm: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if int(self.n_sutures) < 1:
            raise InvalidConfig("n_sutures must be >= 1")
        for name in ("tangle_prob_raw", "tangle_prob_swept", "alignment_snap_prob", "closure_miss_prob"):
            v = getattr(self, name)
            if not 0 <= v < 1:
                raise InvalidConfig(f"{name} must be in [0, 1), got {v}")
        for name in ("grasp_tolerance", "insertion_height_tolerance", "alignment_tolerance_deg",
                     "estimate_success_mm"):
            if not getattr(self, name) > 0:
                raise InvalidConfig(f"{name} must be positive")
        if self.gripper_sigma < 0 or self.depth_sigma < 0 or self.wound_sigma < 0:
            raise InvalidConfig("noise levels must be >= 0")
        if self.cloud_points < 10 or self.ransac_iterations < 1:
            raise InvalidConfig("cloud_points must be >= 10 and ransac_iterations >= 1")

    @classmethod
    def for_ablation(cls, name, **overrides):
        if name not in ABLATIONS:
            raise InvalidConfig(f"unknown ablation {name!r}; choose from {ABLATIONS}")
        flags = {"full": {}, "no-ekf": {"enable_ekf": False}, "no-thread": {"enable_thread_mgmt": False}}
        return cls(**{**overrides, **flags[name]})

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "noise" in d and isinstance(d["noise"], dict):
            d["noise"] = NoiseModel(**d["noise"])
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise InvalidConfig(f"unknown trial config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class TrialResult:
    sutures_attempted: int
    sutures_succeeded: int
    closed_stitches: int
    errors: tuple
    pose_estimate_successes: int
    pose_estimate_attempts: int
    seed: int
    cinch: tuple = ()

    def __post_init__(self):
        if not 0 <= self.closed_stitches <= self.sutures_succeeded <= self.sutures_attempted:
            raise ValueError("need closed <= succeeded <= attempted")

    def to_dict(self):
        return {
            "seed": self.seed,
            "sutures_attempted": self.sutures_attempted,
            "sutures_succeeded": self.sutures_succeeded,
            "closed_stitches": self.closed_stitches,
            "errors": [asdict(e) for e in self.errors],
            "pose_estimate_successes": self.pose_estimate_successes,
            "pose_estimate_attempts": self.pose_estimate_attempts,
            "cinch": list(self.cinch),
        }


@dataclass(frozen=True)
class MetricsReport:
    n_trials: int
    avg_sutures: float
    std_sutures: float
    single_suture_success_rate: float
    wound_gap_closure_rate: float
    error_counts: dict
    total_errors: int
    needle_estimate_success_rate: float | None

    def to_dict(self):
        return asdict(self)


def aggregate(results, n_planned=6):
    results = list(results)
    if not results:
        raise EmptyResults("no trial results to aggregate")
    succeeded = np.array([r.sutures_succeeded for r in results], dtype=float)
    attempted = sum(r.sutures_attempted for r in results)
    closed = sum(r.closed_stitches for r in results)
    counts = {k: 0 for k in ERROR_KINDS}
    for r in results:
        for e in r.errors:
            counts[e.kind] += 1
    est_attempts = sum(r.pose_estimate_attempts for r in results)
    est_ok = sum(r.pose_estimate_successes for r in results)
    return MetricsReport(
        n_trials=len(results),
        avg_sutures=float(succeeded.mean()),
        std_sutures=float(succeeded.std(ddof=1)) if len(results) > 1 else 0.0,
        single_suture_success_rate=float(100.0 * succeeded.sum() / attempted) if attempted else 0.0,
        wound_gap_closure_rate=100.0 * closed / (n_planned * len(results)),
        error_counts=counts,
        total_errors=sum(counts.values()),
        needle_estimate_success_rate=100.0 * est_ok / est_attempts if est_attempts else None,
    )


def _seed(*key):
    return int(np.random.SeedSequence([int(k) for k in key]).generate_state(1)[0])


def scene_camera():
    return default_camera()


def wound_params(seed, sigma):
    # wound pad facing the camera: local z (up) -> camera -z, centreline along camera x
    return WoundSceneParams(
        rotation=np.diag([1.0, -1.0, -1.0]),
        translation=np.array([0.0, 0.0, 170.0]),
        sigma=sigma,
        seed=seed,
    )


def needle_pose(seed):
    """Needle held in view of the camera with a random tilt."""
    rng = np.random.default_rng(seed)
    rot = (rotation_about_axis([0, 0, 1], rng.uniform(-0.5, 0.5))
           @ rotation_about_axis([1, 0, 0], rng.uniform(-0.5, 0.5))
           @ rotation_about_axis([0, 1, 0], rng.uniform(-0.5, 0.5)))
    pos = np.array([rng.uniform(-20, 20), rng.uniform(-15, 15), 150.0])
    return Pose(pos, rot)


class MeasurementCache:
    """Lazily drawn measurement streams keyed by (trial seed, suture, stage).

    Streams are pure functions of their key, so configurations run on the
    same seeds can share one cache.
    """

    def __init__(self):
        self._streams = {}

    def stream(self, key, gt, cfg, camera):
        buf = self._streams.setdefault(key, [])
        k = 0
        while True:
            while len(buf) <= k:
                s = _seed(*key, len(buf))
                noise = replace(cfg.noise, seed=s)
                try:
                    cloud = sample_needle_cloud(gt, noise, cfg.cloud_points)
                    m = measure_needle(cloud, gt.radius, RansacConfig(iterations=cfg.ransac_iterations, seed=s), camera)
                except StitchError:
                    m = None
                buf.append(m)
            yield buf[k]
            k += 1


def _valid(stream):
    return (m for m in stream if m is not None)


def _estimate(cfg, cache, key, gt, camera):
    """Pose estimate for one stage; ``None`` when nothing usable was measured."""
    ekf = EkfConfig()
    draws = cache.stream(key, gt, cfg, camera)
    if cfg.enable_ekf:
        try:
            return estimate_needle(_valid(_limit(draws, 2 * ekf.max_measurements)), ekf).needle
        except EstimateTimeout as exc:
            return exc.state.needle
        except StitchError:
            return None
    for m in _limit(draws, ekf.max_measurements):
        if m is not None:
            return m
    return None


def _limit(it, n):
    for k, x in enumerate(it):
        if k >= n:
            return
        yield x


def _residual_alignment_deg(true_needle, rot, pivot, model, level=False):
    moved = (true_needle.normal @ rot.T)
    ang = math.degrees(math.acos(min(1.0, abs(float(unit(moved) @ model.centerline.direction)))))
    if level:
        chord = rot @ (true_needle.endpoint_right - true_needle.endpoint_left)
        tilt = math.degrees(math.asin(min(1.0, abs(float(chord @ model.up)) / np.linalg.norm(chord))))
        ang = max(ang, tilt)
    return ang


def run_trial(cfg=TrialConfig(), cache=None, camera=None):
    """Simulate one trial of ``cfg.n_sutures`` suture throws."""
    if not isinstance(cfg, TrialConfig):
        raise InvalidConfig("cfg must be a TrialConfig")
    cache = MeasurementCache() if cache is None else cache
    camera = scene_camera() if camera is None else camera
    seed = int(cfg.seed)

    scene, _ = generate_wound_scene(wound_params(_seed(seed, 0), cfg.wound_sigma))
    model = build_wound_model(scene, RansacConfig(seed=_seed(seed, 1)))
    plan = plan_sutures(model, cfg.n_sutures)

    attempted = succeeded = closed = 0
    est_ok = est_n = 0
    errors = []
    cinch = []
    for i in range(1, cfg.n_sutures + 1):
        attempted += 1
        rng = np.random.default_rng(_seed(seed, 2, i))
        u_tangle, u_snap, u_close = rng.random(3)
        grip_err = rng.standard_normal() * cfg.gripper_sigma

        failure = None
        for stage_id, stage in enumerate(STAGES):
            gt = NeedleGroundTruth(needle_pose(_seed(seed, 3, i, stage_id)))
            truth = oracle_needle_state(gt, camera)
            tip_side = gt.tip_label(camera)
            thread_side = "left" if tip_side == "right" else "right"
            est = _estimate(cfg, cache, (seed, i, stage_id), gt, camera)
            est_n += 1
            if est is not None and max(endpoint_errors(est, truth)) < cfg.estimate_success_mm:
                est_ok += 1
            if est is None:
                failure = ("M", f"{stage}: no usable needle estimate")
                break

            if stage == "pre_insertion":
                try:
                    pose = controller.pre_insertion_alignment(est, model, tip_side)
                except StitchError as exc:
                    failure = ("A", f"pre-insertion alignment: {exc}")
                    break
                if cfg.enable_alignment:
                    res = _residual_alignment_deg(truth, pose.orientation, est.center, model)
                    if res > cfg.alignment_tolerance_deg:
                        failure = ("A", f"pre-insertion residual {res:.2f} deg")
                        break
                elif u_snap < cfg.alignment_snap_prob:
                    failure = ("A", "needle snapped out of alignment")
                    break
                tip = est.endpoint(tip_side)
                if cfg.enable_ekf:
                    try:
                        _, depth = render_views(gt, camera, depth_sigma=cfg.depth_sigma,
                                                background_depth=gt.pose.position[2] + 30.0,
                                                seed=_seed(seed, 4, i))
                        tip = refine_tip(depth, camera, est, tip_side)
                    except StitchError:
                        pass
                err = pose.orientation @ (gt.tip_point - tip)
                height = abs(float(err @ model.up) + grip_err)
                if height > cfg.insertion_height_tolerance:
                    failure = ("I", f"tip height error {height:.2f} mm")
                    break
                insertion = plan.pairs[i - 1][0]
                aligned = controller.apply_alignment(est, pose)
                start = aligned.transformed(Pose(insertion - aligned.endpoint(tip_side), np.eye(3)))
                controller.insertion_trajectory(
                    start, insertion, model,
                    controller.InsertionConfig(tip_side=tip_side),
                )
                if cfg.enable_thread_mgmt:
                    controller.thread_sweep_trajectory(model, plan.centered_positions[i - 1])
                p_tangle = cfg.tangle_prob_swept if cfg.enable_thread_mgmt else cfg.tangle_prob_raw
                if u_tangle < p_tangle:
                    failure = ("T", "thread tangled during extraction")
                    break

            elif stage == "extraction":
                g_est = controller.extraction_grasp(est, tip_side).grasp_point
                g_true = controller.extraction_grasp(truth, tip_side).grasp_point
                miss = float(np.linalg.norm(g_est - g_true))
                if miss > cfg.grasp_tolerance:
                    failure = ("M", f"extraction grasp off by {miss:.2f} mm")
                    break
                cinch.append(controller.cinch_translation(cfg.n_sutures, i, plan.d))

            else:
                g_est = controller.handover_grasp(est, thread_side).grasp_point
                g_true = controller.handover_grasp(truth, thread_side).grasp_point
                miss = float(np.linalg.norm(g_est - g_true))
                if miss > cfg.grasp_tolerance:
                    failure = ("M", f"handover grasp off by {miss:.2f} mm")
                    break
                try:
                    pose = controller.handover_alignment(est, model)
                except StitchError as exc:
                    failure = ("A", f"handover alignment: {exc}")
                    break
                if cfg.enable_alignment:
                    res = _residual_alignment_deg(truth, pose.orientation, est.center, model, level=True)
                    if res > cfg.alignment_tolerance_deg:
                        failure = ("A", f"handover residual {res:.2f} deg")
                        break

        if failure is not None:
            errors.append(ErrorEvent(failure[0], i, failure[1]))
            break
        succeeded += 1
        if u_close >= cfg.closure_miss_prob:
            closed += 1

    return TrialResult(
        sutures_attempted=attempted,
        sutures_succeeded=succeeded,
        closed_stitches=closed,
        errors=tuple(errors),
        pose_estimate_successes=est_ok,
        pose_estimate_attempts=est_n,
        seed=seed,
        cinch=tuple(cinch),
    )


def run_experiment(cfg, trials, base_seed, cache=None, workers=1):
    """Trials on seeds ``base_seed .. base_seed + trials - 1``.

    With ``workers > 1`` trials run in separate processes; results are
    returned in seed order either way and do not depend on ``workers``.
    """
    cfgs = [replace(cfg, seed=base_seed + k) for k in range(trials)]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(run_trial, cfgs))
    cache = MeasurementCache() if cache is None else cache
    return [run_trial(c, cache) for c in cfgs]
