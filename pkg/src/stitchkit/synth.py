"""Synthetic ground truth: needle clouds, mask/depth renders and raised-wound
scenes with controllable noise. Every generator is a pure function of its
parameters and seed."""

from dataclasses import dataclass, field
import math

import numpy as np

from .camera import CameraModel
from .errors import InvalidParams, InvalidRadius, NotVisible
from .geom3d import Line3, Plane, Pose, canonical_sign, rotation_about_axis, unit
from .needle import NeedleMeasurement, arc_normal, label_endpoints
from .planner import WoundModel, WoundScene

DEFAULT_NEEDLE_RADIUS = 40.0 / math.pi


@dataclass(frozen=True)
class NeedleGroundTruth:
    """Semicircular needle: local arc ``r (cos t, sin t, 0)`` for ``t`` in [0, pi].

    ``thread_side`` names the local end carrying the thread: ``"left"`` is
    local -x (t = pi), so the tip is at local +x.
    """

    pose: Pose
    radius: float = DEFAULT_NEEDLE_RADIUS
    thread_side: str = "left"

    def __post_init__(self):
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise InvalidRadius(f"needle radius must be positive, got {self.radius}")
        if self.thread_side not in ("left", "right"):
            raise ValueError("thread_side must be 'left' or 'right'")

    def local_arc(self, t):
        t = np.asarray(t, dtype=float)
        return self.radius * np.column_stack([np.cos(t), np.sin(t), np.zeros_like(t)])

    def arc_points(self, count):
        return self.pose.apply(self.local_arc(np.linspace(0.0, math.pi, count)))

    @property
    def tip_point(self):
        t = 0.0 if self.thread_side == "left" else math.pi
        return self.pose.apply(self.local_arc([t]))[0]

    @property
    def thread_point(self):
        t = math.pi if self.thread_side == "left" else 0.0
        return self.pose.apply(self.local_arc([t]))[0]

    def tip_label(self, camera=None):
        """Endpoint label ('left'/'right') the tip receives in a measurement."""
        oracle = oracle_needle_state(self, camera)
        dl = np.linalg.norm(oracle.endpoint_left - self.tip_point)
        dr = np.linalg.norm(oracle.endpoint_right - self.tip_point)
        return "left" if dl < dr else "right"


@dataclass(frozen=True)
class NoiseModel:
    sigma: float = 0.05
    specular_dropout: float = 0.15
    boundary_factor: float = 3.0
    boundary_band: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise InvalidParams("sigma must be >= 0")
        if not 0 <= self.specular_dropout < 1:
            raise InvalidParams("specular_dropout must be in [0, 1)")
        if self.boundary_factor < 1:
            raise InvalidParams("boundary_factor must be >= 1")
        if not 0 <= self.boundary_band <= 0.5:
            raise InvalidParams("boundary_band must be in [0, 0.5]")


def oracle_needle_state(gt, camera=None):
    """Exact needle state, labelled the way ``measure_needle`` labels it."""
    a, b = gt.pose.apply(gt.local_arc([0.0, math.pi]))
    center = gt.pose.position.copy()
    left, right = label_endpoints(a, b, None if camera is None else camera.x_axis)
    mid = gt.pose.apply(gt.local_arc([0.5 * math.pi]))
    normal = arc_normal(center, right, mid, gt.pose.rotate([0.0, 0.0, 1.0]))
    return NeedleMeasurement(center, left, right, normal, gt.radius)


def sample_needle_cloud(gt, noise=NoiseModel(), count=500):
    """Evenly spaced arc samples with Gaussian jitter and random dropout.

    Points within ``boundary_band`` (fraction of the arc) of either end get
    ``boundary_factor`` times the jitter.
    """
    if count < 1:
        raise InvalidParams("count must be >= 1")
    rng = np.random.default_rng(noise.seed)
    t = np.linspace(0.0, math.pi, count)
    pts = gt.pose.apply(gt.local_arc(t))
    frac = t / math.pi
    band = (frac < noise.boundary_band) | (frac > 1.0 - noise.boundary_band)
    sig = np.where(band, noise.sigma * noise.boundary_factor, noise.sigma)
    jitter = rng.standard_normal((count, 3)) * sig[:, None]
    keep = rng.random(count) >= noise.specular_dropout
    return (pts + jitter)[keep]


def default_camera(width=640, height=480, focal=800.0, pose=None):
    return CameraModel(focal, focal, (width - 1) / 2.0, (height - 1) / 2.0, width, height,
                       Pose.identity() if pose is None else pose)


def render_views(gt, camera, pixel_thickness=3, depth_sigma=0.0, background_depth=None,
                 quantization=0.05, seed=0):
    """Needle mask and depth raster seen by ``camera``.

    Mask pixels lie within ``pixel_thickness / 2`` of the projected arc
    (nearest pixel when the thickness is <= 1). Needle pixels carry the depth
    of the closest arc sample; other pixels carry ``background_depth`` or 0.
    Gaussian ``depth_sigma`` noise is added to valid pixels before
    quantisation.
    """
    coarse = gt.arc_points(65)
    uv, z = camera.project(coarse)
    if np.any(z <= 0) or not np.all(np.isfinite(uv)):
        raise NotVisible("needle is not entirely in front of the camera")
    px_len = float(np.sum(np.linalg.norm(np.diff(uv, axis=0), axis=1)))
    n = max(64, int(math.ceil(px_len * 4)) + 1)
    uv, z = camera.project(gt.arc_points(n))
    rows_f, cols_f = uv[:, 1], uv[:, 0]
    h, w = camera.height, camera.width

    if pixel_thickness <= 1:
        pr = np.rint(rows_f).astype(np.int64)
        pc = np.rint(cols_f).astype(np.int64)
        dist = np.hypot(pr - rows_f, pc - cols_f)
        zz = z
    else:
        rad = pixel_thickness / 2.0
        k = int(math.ceil(rad))
        dr, dc = np.meshgrid(np.arange(-k, k + 1), np.arange(-k, k + 1), indexing="ij")
        base_r = np.rint(rows_f).astype(np.int64)
        base_c = np.rint(cols_f).astype(np.int64)
        pr = (base_r[:, None] + dr.ravel()[None, :]).ravel()
        pc = (base_c[:, None] + dc.ravel()[None, :]).ravel()
        dist = np.hypot(pr - np.repeat(rows_f, dr.size), pc - np.repeat(cols_f, dr.size))
        zz = np.repeat(z, dr.size)
        inside_disk = dist <= rad
        pr, pc, dist, zz = pr[inside_disk], pc[inside_disk], dist[inside_disk], zz[inside_disk]

    ok = (pr >= 0) & (pr < h) & (pc >= 0) & (pc < w)
    pr, pc, dist, zz = pr[ok], pc[ok], dist[ok], zz[ok]
    if pr.size == 0:
        raise NotVisible("needle projects outside the image")
    flat = pr * w + pc
    order = np.lexsort((zz, dist, flat))
    flat, zz = flat[order], zz[order]
    first = np.ones(flat.size, dtype=bool)
    first[1:] = flat[1:] != flat[:-1]
    flat, zz = flat[first], zz[first]

    mask = np.zeros(h * w, dtype=bool)
    mask[flat] = True
    depth = np.full(h * w, 0.0 if background_depth is None else float(background_depth))
    depth[flat] = zz
    valid = depth != 0
    if depth_sigma > 0:
        rng = np.random.default_rng(seed)
        noise = rng.standard_normal(h * w) * depth_sigma
        depth[valid] += noise[valid]
    if quantization:
        depth[valid] = np.round(depth[valid] / quantization) * quantization
    return mask.reshape(h, w), depth.reshape(h, w)


@dataclass(frozen=True)
class WoundSceneParams:
    """Raised linear wound: a ``width`` x ``length`` top face ``height`` above
    the phantom base.

    ``noise_axis="normal"`` puts the jitter along the surface normal (the
    stereo depth axis for a camera looking down at the pad); ``"isotropic"``
    jitters all three axes.
    """

    height: float = 5.0
    width: float = 9.0
    length: float = 60.0
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    points_per_cloud: int = 1500
    sigma: float = 0.0
    noise_axis: str = "normal"
    phantom_margin: float = 20.0
    phantom_tilt_deg: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("height", "width", "length"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise InvalidParams(f"{name} must be positive, got {v}")
        if self.sigma < 0 or self.points_per_cloud < 10:
            raise InvalidParams("sigma must be >= 0 and points_per_cloud >= 10")
        if self.noise_axis not in ("normal", "isotropic"):
            raise InvalidParams(f"unknown noise_axis {self.noise_axis!r}")

    @property
    def pose(self):
        return Pose(np.asarray(self.translation, dtype=float), np.asarray(self.rotation, dtype=float))


def _grid(x0, x1, y0, y1, nx, ny):
    gx, gy = np.meshgrid(np.linspace(x0, x1, nx), np.linspace(y0, y1, ny), indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


def generate_wound_scene(params=WoundSceneParams()):
    """Segmented clouds of a raised wound and the exact model they came from."""
    p = params
    rng = np.random.default_rng(p.seed)
    half_l, half_w = p.length / 2.0, p.width / 2.0
    n = p.points_per_cloud

    ny = max(3, int(round(math.sqrt(n * p.width / p.length))))
    nx = max(3, n // ny)
    top = _grid(-half_l, half_l, -half_w, half_w, nx, ny)
    surface = np.column_stack([top, np.full(len(top), p.height)])

    nc = max(2, n // 5)
    center = np.column_stack([np.linspace(-half_l, half_l, nc), np.zeros(nc), np.full(nc, p.height)])

    m = p.phantom_margin
    side = max(3, int(round(math.sqrt(n))) * 2)
    base = _grid(-half_l - m, half_l + m, -half_w - m, half_w + m, side, side)
    outside = (np.abs(base[:, 1]) > half_w + 0.5) | (np.abs(base[:, 0]) > half_l + 0.5)
    base = base[outside]
    phantom = np.column_stack([base, np.zeros(len(base))])
    if p.phantom_tilt_deg:
        tilt = rotation_about_axis([1.0, 0.0, 0.0], math.radians(p.phantom_tilt_deg))
        phantom = phantom @ tilt.T

    clouds = []
    for cloud in (center, surface, phantom):
        if p.sigma > 0:
            if p.noise_axis == "normal":
                cloud = cloud + np.column_stack([
                    np.zeros((len(cloud), 2)), rng.standard_normal(len(cloud)) * p.sigma,
                ])
            else:
                cloud = cloud + rng.standard_normal(cloud.shape) * p.sigma
        clouds.append(p.pose.apply(cloud))

    pose = p.pose
    up = pose.rotate([0.0, 0.0, 1.0])
    top_point = pose.apply([0.0, 0.0, p.height])
    direction = canonical_sign(pose.rotate([1.0, 0.0, 0.0]))
    oracle = WoundModel(
        surface_plane=Plane.from_point_normal(top_point, up),
        phantom_plane=Plane.from_point_normal(pose.position, up),
        centerline=Line3(top_point, direction),
        centerline_extent=(-half_l, half_l),
        width=float(p.width),
        height=float(p.height),
        width_dir=unit(np.cross(up, direction)),
    )
    return WoundScene(*clouds), oracle
