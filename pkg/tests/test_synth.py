import math

import numpy as np
import pytest
from scipy import stats
from scipy.ndimage import binary_dilation

from stitchkit.camera import look_at
from stitchkit.errors import InvalidParams, InvalidRadius, NotVisible
from stitchkit.geom3d import Pose, rotation_about_axis
from stitchkit.synth import (
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


def test_default_radius_is_arc_length_reading():
    assert abs(math.pi * DEFAULT_NEEDLE_RADIUS - 40) < 1e-12


def test_oracle_identity():
    o = oracle_needle_state(NeedleGroundTruth(Pose.identity(), 10.0))
    assert np.allclose(o.center, 0)
    assert np.allclose(o.endpoint_left, [-10, 0, 0]) and np.allclose(o.endpoint_right, [10, 0, 0])
    assert np.allclose(o.normal, [0, 0, 1])


def test_oracle_equivariant():
    rot = rotation_about_axis([1, 2, 3], 0.7)
    pose = Pose([1, 2, 3], rot)
    a = oracle_needle_state(NeedleGroundTruth(Pose.identity(), 10.0))
    b = oracle_needle_state(NeedleGroundTruth(pose, 10.0), None)
    ends_a = {tuple(np.round(pose.apply(e), 9)) for e in (a.endpoint_left, a.endpoint_right)}
    ends_b = {tuple(np.round(e, 9)) for e in (b.endpoint_left, b.endpoint_right)}
    assert ends_a == ends_b
    assert np.allclose(b.center, pose.position)
    assert abs(abs(b.normal @ rot[:, 2]) - 1) < 1e-12


def test_bad_radius():
    with pytest.raises(InvalidRadius):
        NeedleGroundTruth(Pose.identity(), 0.0)


def test_clean_cloud_on_circle():
    gt = NeedleGroundTruth(Pose([1, 2, 3], rotation_about_axis([1, 0, 1], 0.5)), 12.0)
    pts = sample_needle_cloud(gt, NoiseModel(sigma=0, specular_dropout=0), 500)
    assert len(pts) == 500
    rel = pts - gt.pose.position
    assert np.allclose(np.linalg.norm(rel, axis=1), 12.0, atol=1e-9)
    assert np.allclose(rel @ gt.pose.orientation[:, 2], 0, atol=1e-9)


def test_dropout_binomial():
    gt = NeedleGroundTruth(Pose.identity())
    counts = [len(sample_needle_cloud(gt, NoiseModel(specular_dropout=0.3, seed=s), 500)) for s in range(200)]
    lo, hi = stats.binom.interval(0.99, 500, 0.7)
    inside = np.mean([(lo <= c <= hi) for c in counts])
    assert inside >= 0.95
    assert abs(np.mean(counts) - 350) < 3


def test_boundary_variance_ratio():
    gt = NeedleGroundTruth(Pose.identity(), 10.0)
    noise = NoiseModel(sigma=0.1, specular_dropout=0, boundary_factor=3, seed=1)
    clean = sample_needle_cloud(gt, NoiseModel(sigma=0, specular_dropout=0), 10000)
    noisy = sample_needle_cloud(gt, noise, 10000)
    d = noisy - clean
    frac = np.linspace(0, 1, 10000)
    band = (frac < 0.1) | (frac > 0.9)
    ratio = d[band].var() / d[~band].var()
    assert 9 / 2 <= ratio <= 9 * 2


def test_noise_params_validated():
    with pytest.raises(InvalidParams):
        NoiseModel(sigma=-1)
    with pytest.raises(InvalidParams):
        NoiseModel(specular_dropout=1.0)
    with pytest.raises(InvalidParams):
        NoiseModel(boundary_factor=0.5)


def test_cloud_deterministic():
    gt = NeedleGroundTruth(Pose.identity())
    a = sample_needle_cloud(gt, NoiseModel(seed=3), 400)
    b = sample_needle_cloud(gt, NoiseModel(seed=3), 400)
    assert np.array_equal(a, b)


def test_render_tip_in_mask_and_depth():
    cam = default_camera()
    gt = NeedleGroundTruth(Pose([3, -2, 150], rotation_about_axis([1, 0, 0], 0.3)))
    mask, depth = render_views(gt, cam, pixel_thickness=3, quantization=0.05)
    assert mask.any()
    (r, c), _ = cam.pixel_of(gt.tip_point)
    grown = binary_dilation(mask, np.ones((3, 3), bool))
    assert grown[int(round(r)), int(round(c))]
    # depth at mask pixels equals the arc's camera depth within half a quantisation step
    pts = gt.arc_points(20000)
    uv, z = cam.project(pts)
    rr, cc = np.rint(uv[:, 1]).astype(int), np.rint(uv[:, 0]).astype(int)
    rows, cols = np.nonzero(mask)
    for k in range(0, len(rows), 25):
        near = (np.abs(rr - rows[k]) <= 2) & (np.abs(cc - cols[k]) <= 2)
        assert z[near].min() - 0.025 - 1e-9 <= depth[rows[k], cols[k]] <= z[near].max() + 0.025 + 1e-9
    assert np.all(depth[~mask] == 0)


def test_render_behind_camera():
    cam = default_camera()
    with pytest.raises(NotVisible):
        render_views(NeedleGroundTruth(Pose([0, 0, -100], np.eye(3))), cam)


def test_render_rigid_equivariance():
    cam = default_camera()
    gt = NeedleGroundTruth(Pose([0, 5, 140], rotation_about_axis([0, 1, 0], 0.4)))
    move = Pose([20, -10, 30], rotation_about_axis([1, 1, 0], 0.3))
    cam2 = default_camera(pose=move)
    gt2 = NeedleGroundTruth(move.compose(gt.pose))
    m1, d1 = render_views(gt, cam)
    m2, d2 = render_views(gt2, cam2)
    assert np.array_equal(m1, m2)
    assert np.allclose(d1, d2, atol=0.05 + 1e-9)


def test_render_deterministic_with_noise():
    cam = default_camera()
    gt = NeedleGroundTruth(Pose([0, 0, 150], np.eye(3)))
    a = render_views(gt, cam, depth_sigma=1.0, background_depth=180, seed=5)
    b = render_views(gt, cam, depth_sigma=1.0, background_depth=180, seed=5)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_wound_oracle_matches_params():
    p = WoundSceneParams(height=4, width=8, length=50)
    scene, m = generate_wound_scene(p)
    assert (m.height, m.width, m.length) == (4.0, 8.0, 50.0)
    assert abs(m.surface_plane.signed_distance(scene.wound_surface_cloud)).max() < 1e-12
    assert abs(m.phantom_plane.signed_distance(scene.phantom_cloud)).max() < 1e-12


def test_wound_invalid():
    with pytest.raises(InvalidParams):
        WoundSceneParams(height=-1)
    with pytest.raises(InvalidParams):
        WoundSceneParams(noise_axis="sideways")


def test_wound_deterministic():
    p = WoundSceneParams(sigma=0.3, seed=9)
    a, _ = generate_wound_scene(p)
    b, _ = generate_wound_scene(p)
    for x, y in zip((a.wound_center_cloud, a.wound_surface_cloud, a.phantom_cloud),
                    (b.wound_center_cloud, b.wound_surface_cloud, b.phantom_cloud)):
        assert np.array_equal(x, y)


def test_tip_label_matches_oracle():
    cam = default_camera(pose=look_at([0, 0, 0], [0, 0, 100], [0, -1, 0]))
    gt = NeedleGroundTruth(Pose([0, 0, 150], rotation_about_axis([0, 0, 1], math.pi)))
    side = gt.tip_label(cam)
    o = oracle_needle_state(gt, cam)
    assert np.allclose(o.endpoint(side), gt.tip_point)
