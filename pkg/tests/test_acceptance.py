"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the summary lines are
written straight to the terminal even when output capture is on.
"""

import json
import math
import time

import numpy as np
import pytest
from scipy import ndimage, stats

from stitchkit.cli import main
from stitchkit.controller import cinch_translation
from stitchkit.errors import EstimateTimeout, StitchError
from stitchkit.geom3d import Pose, RansacConfig, fit_circle_in_plane, ransac_fit_plane, rotation_about_axis
from stitchkit.harness import (
    ErrorEvent,
    MeasurementCache,
    TrialConfig,
    TrialResult,
    aggregate,
    needle_pose,
    run_experiment,
)
from stitchkit.mask2d import skeletonize
from stitchkit.needle import (
    NeedleMeasurement,
    endpoint_errors,
    estimate_needle,
    locate_tip_pixel,
    measure_needle,
    raw_tip,
    refine_tip,
)
from stitchkit.planner import build_wound_model, plan_sutures
from stitchkit.synth import (
    NeedleGroundTruth,
    NoiseModel,
    WoundSceneParams,
    default_camera,
    generate_wound_scene,
    oracle_needle_state,
    render_views,
    sample_needle_cloud,
)

NEEDLE_R = 40 / math.pi


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail, elapsed, budget):
        within = elapsed < budget
        status = "PASS" if ok and within else "FAIL"
        line = f"[acceptance {number:>2}] {status} {title}: {detail}; {elapsed:.3f} s (budget {budget:g} s)"
        with capsys.disabled():
            print("\n" + line)
        assert ok, line
        assert within, line
    return emit


def _draws(gt, camera, seed, points=300, iterations=120):
    """Measurement stream from fresh noisy clouds; failed fits are skipped."""
    for k in range(40):
        cloud = sample_needle_cloud(gt, NoiseModel(seed=seed * 1000 + k), points)
        try:
            yield measure_needle(cloud, gt.radius, RansacConfig(iterations=iterations, seed=k), camera)
        except StitchError:
            continue


def _filtered(stream):
    try:
        return estimate_needle(stream).needle
    except EstimateTimeout as exc:
        return exc.state.needle


def test_criterion_01_cinch_lengths(report):
    t = time.perf_counter()
    got = [cinch_translation(6, i, 10) for i in range(1, 7)]
    elapsed = time.perf_counter() - t
    report(1, "cinch translation n=6 d=10", got == [60, 50, 40, 30, 20, 10], f"{got}", elapsed, 1e-3)


def test_criterion_02_circle_fit(report):
    rng = np.random.default_rng(2024)
    r, good = 12.73, 0
    t = time.perf_counter()
    for _ in range(100):
        q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        center = rng.uniform(-50, 50, 3)
        a0 = rng.uniform(0, 2 * np.pi)
        a = a0 + rng.uniform(0, np.pi, 500)
        local = np.column_stack([r * np.cos(a), r * np.sin(a), np.zeros(500)])
        pts = local @ q.T + center + rng.normal(0, 0.05, (500, 3))
        plane, _ = ransac_fit_plane(pts, RansacConfig(iterations=200))
        c = fit_circle_in_plane(pts, plane)
        good += np.linalg.norm(c.center - center) < 0.2 and abs(c.radius - r) < 0.2
    elapsed = time.perf_counter() - t
    report(2, "semicircle fit sigma=0.05", good >= 99, f"{good}/100 within 0.2 mm", elapsed, 5)


@pytest.mark.slow
def test_criterion_03_ekf_benefit(report):
    cam = default_camera()
    single = filt = 0
    t = time.perf_counter()
    for seed in range(200):
        gt = NeedleGroundTruth(needle_pose(seed))
        truth = oracle_needle_state(gt, cam)
        first = next(_draws(gt, cam, seed))
        single += max(endpoint_errors(first, truth)) < 2.0
        filt += max(endpoint_errors(_filtered(_draws(gt, cam, seed)), truth)) < 2.0
    elapsed = time.perf_counter() - t
    s, f = 100 * single / 200, 100 * filt / 200
    report(3, "EKF vs single-shot success (<2 mm)", f >= s + 5, f"EKF {f:.1f}% vs single {s:.1f}%", elapsed, 60)


def test_criterion_04_consumption(report):
    base = NeedleMeasurement.from_vector(np.r_[0, 0, 150, -12.73, 0, 150, 12.73, 0, 150, 0, 0, 1, 12.73])
    rng = np.random.default_rng(4)

    def jitter():
        v = base.to_vector() + rng.normal(0, 1e-3, 13)
        v[9:12] /= np.linalg.norm(v[9:12])
        return NeedleMeasurement.from_vector(v)

    pulled = []

    def counted(items):
        for m in items:
            pulled.append(m)
            yield m

    t = time.perf_counter()
    est = estimate_needle(counted([jitter() for _ in range(30)]))
    consumed_ok = est.consumed == 10 and len(pulled) == 10 and est.accepted == 3
    pulled.clear()
    far = NeedleMeasurement.from_vector(base.to_vector() + 50.0)
    try:
        estimate_needle(counted([jitter() for _ in range(7)] + [far] * 30))
        timeout = None
    except EstimateTimeout as exc:
        timeout = exc.state.measurement_count
    drawn = len(pulled)
    elapsed = time.perf_counter() - t
    ok = consumed_ok and timeout == 15 and drawn == 15
    report(4, "EKF consumption", ok, f"in-gate consumed {est.consumed}, rejecting stream timed out at {timeout}",
           elapsed, 1)


@pytest.mark.slow
def test_criterion_05_tip_refinement(report):
    cam = default_camera()
    t = time.perf_counter()
    # tip exactly on a pixel centre, needle facing the camera
    tip = np.array([(400 - 319.5) * 150 / 800, (240 - 239.5) * 150 / 800, 150.0])
    gt = NeedleGroundTruth(Pose(tip - [NEEDLE_R, 0, 0], np.eye(3)), NEEDLE_R)
    _, depth = render_views(gt, cam, pixel_thickness=1, background_depth=180.0, quantization=0)
    clean = np.linalg.norm(refine_tip(depth, cam, oracle_needle_state(gt, cam), gt.tip_label(cam)) - gt.tip_point)
    wins = 0
    for seed in range(100):
        gt = NeedleGroundTruth(needle_pose(seed))
        side = gt.tip_label(cam)
        est = _filtered(_draws(gt, cam, seed))
        _, depth = render_views(gt, cam, depth_sigma=1.0, background_depth=gt.pose.position[2] + 30, seed=seed)
        refined = refine_tip(depth, cam, est, side)
        raw = raw_tip(depth, cam, locate_tip_pixel(depth, cam, est, side))
        wins += np.linalg.norm(refined - gt.tip_point) < np.linalg.norm(raw - gt.tip_point)
    elapsed = time.perf_counter() - t
    report(5, "tip refinement", clean < 1e-3 and wins >= 90,
           f"noise-free error {clean:.2e} mm, refined beats raw in {wins}/100", elapsed, 30)


def test_criterion_06_wound_roundtrip(report):
    t = time.perf_counter()
    scene, _ = generate_wound_scene(WoundSceneParams(height=5, width=9, length=60))
    exact = build_wound_model(scene)
    err0 = max(abs(exact.height - 5), abs(exact.width - 9))
    rot = rotation_about_axis([1, 1, 0], 0.4)
    noisy_scene, _ = generate_wound_scene(WoundSceneParams(sigma=0.2, rotation=rot, translation=[5, -3, 120], seed=6))
    noisy = build_wound_model(noisy_scene)
    rel = max(abs(noisy.height - 5) / 5, abs(noisy.width - 9) / 9)
    plan = plan_sutures(exact, 6)
    s = np.array([exact.centerline.parameter(p[None])[0] for p in plan.centered_positions])
    spacing = np.ptp(np.diff(s))
    depth_err = max(abs(exact.surface_plane.signed_distance(p) + exact.height / 2)
                    for pair in plan.pairs for p in pair)
    elapsed = time.perf_counter() - t
    ok = err0 < 1e-6 and rel < 0.05 and spacing < 1e-9 and depth_err < 1e-9
    report(6, "wound model roundtrip", ok,
           f"sigma=0 error {err0:.1e} mm, sigma=0.2 error {100 * rel:.2f}%, spacing spread {spacing:.1e}, "
           f"depth error {depth_err:.1e}", elapsed, 5)


def test_criterion_07_skeleton(report):
    eight = np.ones((3, 3), int)
    bad = 0
    t = time.perf_counter()
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        m = rng.random((24, 24)) < rng.uniform(0.2, 0.7)
        if seed % 2:
            m = ndimage.binary_closing(m)
        sk = skeletonize(m)
        bad += bool(np.any(sk & ~m)) or not np.array_equal(skeletonize(sk), sk)
    bar = np.zeros((7, 26), bool)
    bar[2:5, 3:23] = True
    line = skeletonize(bar)
    rows = np.nonzero(line)[0]
    one_px = len(set(rows)) == 1 and ndimage.label(line, eight)[1] == 1 and line.sum() >= 18
    elapsed = time.perf_counter() - t
    report(7, "skeletonization", bad == 0 and one_px,
           f"{1000 - bad}/1000 masks idempotent and inside the mask, bar -> {line.sum()} px in one row",
           elapsed, 10)


@pytest.mark.slow
def test_criterion_08_ablation_ordering(report):
    cache = MeasurementCache()
    t = time.perf_counter()
    runs = {name: run_experiment(TrialConfig.for_ablation(name), 100, 1000, cache)
            for name in ("full", "no-ekf", "no-thread")}
    elapsed = time.perf_counter() - t
    n = {k: np.array([r.sutures_succeeded for r in v]) for k, v in runs.items()}
    m = {k: aggregate(v) for k, v in runs.items()}
    p_ekf = stats.ttest_rel(n["full"], n["no-ekf"], alternative="greater").pvalue
    p_thread = stats.ttest_rel(n["full"], n["no-thread"], alternative="greater").pvalue
    t_ratio = m["full"].error_counts["T"] / max(m["no-thread"].error_counts["T"], 1)
    ok = p_ekf < 0.05 and p_thread < 0.05 and t_ratio <= 0.6
    report(8, "ablation ordering", ok,
           f"sutures full {m['full'].avg_sutures:.2f} / no-ekf {m['no-ekf'].avg_sutures:.2f} / "
           f"no-thread {m['no-thread'].avg_sutures:.2f}, p={p_ekf:.1e}, {p_thread:.1e}, "
           f"T ratio {t_ratio:.2f}", elapsed, 120)


@pytest.mark.slow
def test_criterion_09_simulate_determinism(report, tmp_path):
    t = time.perf_counter()
    outs = []
    for k in range(2):
        path = tmp_path / f"run{k}.json"
        assert main(["simulate", "--seed", "42", "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    elapsed = time.perf_counter() - t
    json.loads(outs[0])
    report(9, "simulate determinism", outs[0] == outs[1], f"{len(outs[0])} byte reports identical", elapsed, 60)


def test_criterion_10_metric_arithmetic(report):
    t = time.perf_counter()
    four = TrialResult(5, 4, 4, (ErrorEvent("T", 5),), 0, 0, 0)
    six = TrialResult(6, 6, 6, (), 0, 0, 0)
    none = TrialResult(1, 0, 0, (ErrorEvent("A", 1),), 0, 0, 0)
    a = aggregate([four]).wound_gap_closure_rate
    b = aggregate([four, six, none]).wound_gap_closure_rate
    elapsed = time.perf_counter() - t
    ok = abs(a - 66.7) <= 0.1 and abs(b - 100 * 10 / 18) < 1e-9
    report(10, "closure-rate arithmetic", ok, f"4 of 6 -> {a:.1f}%, 10 of 18 -> {b:.2f}%", elapsed, 1)

