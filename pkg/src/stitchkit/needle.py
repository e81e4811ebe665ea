"""Needle pose estimation: robust circle measurement, gated Kalman smoothing,
and image-based tip refinement.

The needle state is the 13-vector ``[center, left, right, normal, radius]``.
Left/right are assigned by the camera x-axis (world x without a camera), and
``normal`` is oriented so that the needle arc runs counter-clockwise about it
from the right endpoint to the left one.
"""

from dataclasses import dataclass, replace
from itertools import islice
import math

import numpy as np

from . import mask2d
from .errors import (
    DegenerateInput,
    EstimateTimeout,
    InsufficientMeasurements,
    NotVisible,
    RadiusMismatch,
)
from .geom3d import (
    Circle3,
    RansacConfig,
    as_cloud,
    farthest_pair,
    fit_circle_in_plane,
    orthonormal_basis,
    project_point_to_plane,
    ransac_fit_plane,
    ray_circle_intersection,
    unit,
)

STATE_DIM = 13
CENTER = slice(0, 3)
LEFT = slice(3, 6)
RIGHT = slice(6, 9)
NORMAL = slice(9, 12)
RADIUS = 12


@dataclass(frozen=True)
class NeedleMeasurement:
    center: np.ndarray
    endpoint_left: np.ndarray
    endpoint_right: np.ndarray
    normal: np.ndarray
    radius: float

    def to_vector(self):
        return np.concatenate([
            self.center, self.endpoint_left, self.endpoint_right, self.normal, [self.radius],
        ]).astype(float)

    @classmethod
    def from_vector(cls, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (STATE_DIM,):
            raise ValueError(f"needle state must have 13 entries, got {x.shape}")
        return cls(x[CENTER].copy(), x[LEFT].copy(), x[RIGHT].copy(), x[NORMAL].copy(), float(x[RADIUS]))

    def endpoint(self, side):
        if side == "left":
            return self.endpoint_left
        if side == "right":
            return self.endpoint_right
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")

    @property
    def circle(self):
        return Circle3(self.center, self.normal, self.radius)

    def is_consistent(self, radius_tol=0.1, plane_tol=0.5):
        """Check the endpoint/radius/plane relations a clean fit satisfies."""
        if not self.radius > 0:
            return False
        n = unit(self.normal)
        for e in (self.endpoint_left, self.endpoint_right):
            off = e - self.center
            if abs(np.linalg.norm(off) - self.radius) > radius_tol * self.radius:
                return False
            if abs(float(off @ n)) > plane_tol:
                return False
        return True

    def transformed(self, pose):
        """The same needle moved rigidly by ``pose``."""
        return NeedleMeasurement(
            pose.apply(self.center), pose.apply(self.endpoint_left),
            pose.apply(self.endpoint_right), pose.rotate(self.normal), self.radius,
        )

    def to_dict(self):
        return {
            "center": self.center.tolist(),
            "endpoints": {"left": self.endpoint_left.tolist(), "right": self.endpoint_right.tolist()},
            "normal": self.normal.tolist(),
            "radius": self.radius,
        }


def label_endpoints(a, b, x_axis=None):
    """Return ``(left, right)``: smaller projection on ``x_axis`` is left."""
    axis = np.array([1.0, 0.0, 0.0]) if x_axis is None else np.asarray(x_axis, dtype=float)
    pa, pb = float(a @ axis), float(b @ axis)
    if pa < pb:
        return a, b
    if pb < pa:
        return b, a
    return (a, b) if tuple(a) <= tuple(b) else (b, a)


def arc_normal(center, right, arc_points, fallback):
    """Normal that makes the arc run counter-clockwise from ``right``."""
    mid = np.asarray(arc_points, dtype=float).mean(axis=0) - center
    n = np.cross(right - center, mid)
    fallback = unit(fallback)
    s = float(n @ fallback)
    if abs(s) < 1e-12:
        return fallback
    return fallback if s > 0 else -fallback


def _drop_isolated(points, circle, factor=10.0, min_gap=math.radians(2.0)):
    """Remove rim points separated from the rest of the arc on both sides.

    Such points are clutter that happens to lie on the fitted circle; left
    in, they would win the farthest-pair endpoint pick.
    """
    if len(points) < 8:
        return points
    u, v = orthonormal_basis(circle.normal)
    rel = points - circle.center
    ang = np.arctan2(rel @ v, rel @ u)
    order = np.argsort(ang)
    a = ang[order]
    gaps = np.diff(np.r_[a, a[0] + 2 * math.pi])
    limit = max(factor * float(np.median(gaps)), min_gap)
    big = gaps > limit
    isolated = big & np.roll(big, 1)
    if not isolated.any() or isolated.all():
        return points
    return points[np.sort(order[~isolated])]


def measure_needle(cloud, known_radius, cfg=RansacConfig(), camera=None, radius_tolerance=0.2,
                   snap_endpoints=True):
    """One circle measurement of the needle from its segmented point cloud.

    Plane RANSAC, in-plane circle fit (refit on the points near the rim),
    then the farthest pair of the remaining points as endpoints. With
    ``snap_endpoints`` the endpoints are moved radially onto the fitted
    circle, which removes the outward bias the farthest-pair pick inherits
    from noise.
    """
    if not known_radius > 0:
        raise ValueError("known_radius must be positive")
    pts = as_cloud(cloud)
    if len(pts) < 10:
        raise DegenerateInput(f"needle cloud needs >= 10 points, got {len(pts)}")
    view = None if camera is None else camera.view_dir
    plane, inliers = ransac_fit_plane(pts, cfg, view_dir=view)
    proj = project_point_to_plane(pts[inliers], plane)
    circle = fit_circle_in_plane(proj, plane)
    # in-plane clutter survives the plane fit and biases the algebraic fit;
    # alternate rim selection and refitting until the selection settles
    keep = np.ones(len(proj), dtype=bool)
    for _ in range(5):
        on_rim = np.abs(np.linalg.norm(proj - circle.center, axis=1) - circle.radius) <= cfg.inlier_threshold
        if on_rim.sum() < 3 or np.array_equal(on_rim, keep):
            break
        keep = on_rim
        circle = fit_circle_in_plane(proj[keep], plane)
    proj = _drop_isolated(proj[keep], circle)
    if abs(circle.radius - known_radius) / known_radius > radius_tolerance:
        raise RadiusMismatch(
            f"fitted radius {circle.radius:.3f} mm vs known {known_radius:.3f} mm"
        )
    a, b = farthest_pair(proj)
    if snap_endpoints:
        a, b = (circle.center + circle.radius * unit(e - circle.center) for e in (a, b))
    left, right = label_endpoints(a, b, None if camera is None else camera.x_axis)
    normal = arc_normal(circle.center, right, proj, plane.normal)
    return NeedleMeasurement(circle.center, left, right, normal, circle.radius)


@dataclass(frozen=True)
class EkfConfig:
    """Filter settings.

    ``measurement_noise=None`` takes R from the initialisation spread;
    a number gives ``R = measurement_noise * I``.
    """

    init_count: int = 7
    update_count: int = 3
    gate_sigma: float = 3.0
    max_measurements: int = 15
    process_noise: float = 1e-6
    covariance_floor: float = 1e-4
    measurement_noise: float | None = None
    gate_mode: str = "component"

    def __post_init__(self):
        if self.init_count < 1 or self.update_count < 0:
            raise ValueError("init_count must be >= 1 and update_count >= 0")
        if self.max_measurements < self.init_count + self.update_count:
            raise ValueError("max_measurements must cover init_count + update_count")
        if self.gate_mode not in ("component", "mahalanobis"):
            raise ValueError(f"unknown gate_mode {self.gate_mode!r}")


@dataclass(frozen=True)
class EkfState:
    mean: np.ndarray
    covariance: np.ndarray
    measurement_count: int
    accepted_count: int
    reference_mean: np.ndarray
    reference_var: np.ndarray
    measurement_noise: np.ndarray

    @property
    def needle(self):
        return NeedleMeasurement.from_vector(self.mean)


def _renormalise_normal(x):
    n = np.linalg.norm(x[NORMAL])
    if n > 0 and abs(n - 1.0) > 4 * np.finfo(float).eps:
        x[NORMAL] = x[NORMAL] / n
    return x


def _floor_diagonal(p, floor):
    d = np.diag(p)
    low = d < floor
    if low.any():
        p = p.copy()
        p[np.diag_indices_from(p)] = np.where(low, floor, d)
    return p


def ekf_initialize(measurements, cfg=EkfConfig()):
    ms = list(measurements)
    if len(ms) < cfg.init_count:
        raise InsufficientMeasurements(f"need {cfg.init_count} measurements, got {len(ms)}")
    x = np.array([m.to_vector() for m in ms[:cfg.init_count]])
    mean = x[0] + (x - x[0]).mean(axis=0)
    var = x.var(axis=0, ddof=1) if len(x) > 1 else np.zeros(STATE_DIM)
    var = np.maximum(var, cfg.covariance_floor)
    mean = _renormalise_normal(mean)
    if cfg.measurement_noise is None:
        r = np.diag(var)
    else:
        r = float(cfg.measurement_noise) * np.eye(STATE_DIM)
    return EkfState(
        mean=mean,
        covariance=np.diag(var),
        measurement_count=cfg.init_count,
        accepted_count=0,
        reference_mean=mean.copy(),
        reference_var=var.copy(),
        measurement_noise=r,
    )


def _chi2_gate(gate_sigma, dof=STATE_DIM):
    from scipy.stats import chi2, norm

    return float(chi2.ppf(2 * norm.cdf(gate_sigma) - 1, dof))


def in_gate(state, z, cfg=EkfConfig()):
    zv = z.to_vector() if isinstance(z, NeedleMeasurement) else np.asarray(z, dtype=float)
    dev = zv - state.reference_mean
    if cfg.gate_mode == "mahalanobis":
        return float(np.sum(dev * dev / state.reference_var)) <= _chi2_gate(cfg.gate_sigma)
    return bool(np.all(np.abs(dev) <= cfg.gate_sigma * np.sqrt(state.reference_var)))


def ekf_update(state, z, cfg=EkfConfig()):
    """One gated update with identity transition and measurement models.

    Returns ``(new_state, accepted)``. A rejected measurement only bumps the
    measurement count.
    """
    if not in_gate(state, z, cfg):
        return replace(state, measurement_count=state.measurement_count + 1), False
    zv = z.to_vector()
    eye = np.eye(STATE_DIM)
    p = state.covariance + cfg.process_noise * eye
    r = state.measurement_noise
    k = np.linalg.solve((p + r).T, p.T).T
    x = state.mean + k @ (zv - state.mean)
    ik = eye - k
    p = ik @ p @ ik.T + k @ r @ k.T
    p = 0.5 * (p + p.T)
    p = _floor_diagonal(p, cfg.covariance_floor)
    x = _renormalise_normal(x)
    return replace(
        state,
        mean=x,
        covariance=p,
        measurement_count=state.measurement_count + 1,
        accepted_count=state.accepted_count + 1,
    ), True


@dataclass(frozen=True)
class NeedleEstimate:
    needle: NeedleMeasurement
    state: EkfState

    @property
    def consumed(self):
        return self.state.measurement_count

    @property
    def accepted(self):
        return self.state.accepted_count


def estimate_needle(stream, cfg=EkfConfig()):
    """Initialise from the first draws, then apply the gated updates."""
    it = iter(stream)
    first = list(islice(it, cfg.init_count))
    state = ekf_initialize(first, cfg)
    while state.accepted_count < cfg.update_count:
        if state.measurement_count >= cfg.max_measurements:
            raise EstimateTimeout(
                f"{state.accepted_count}/{cfg.update_count} updates accepted "
                f"after {state.measurement_count} measurements",
                state=state,
            )
        z = next(it, None)
        if z is None:
            raise InsufficientMeasurements(
                f"stream ended after {state.measurement_count} measurements"
            )
        state, _ = ekf_update(state, z, cfg)
    return NeedleEstimate(state.needle, state)


def project_tip(camera, estimate, tip_side):
    """(row, col) of the estimated tip; raises NotVisible if off-image."""
    (row, col), depth = camera.pixel_of(estimate.endpoint(tip_side))
    if not depth > 0 or not math.isfinite(row + col):
        raise NotVisible("needle tip is behind the camera")
    if not (-0.5 <= row < camera.height - 0.5 and -0.5 <= col < camera.width - 0.5):
        raise NotVisible(f"needle tip projects outside the image at ({row:.1f}, {col:.1f})")
    return row, col


def locate_tip_pixel(depth, camera, estimate, tip_side, crop_size=200):
    """Tip pixel (row, col) in the full image from the depth raster."""
    depth = np.asarray(depth, dtype=float)
    if depth.shape != (camera.height, camera.width):
        raise NotVisible(f"depth raster {depth.shape} does not match camera resolution")
    hint = project_tip(camera, estimate, tip_side)
    rows, cols = mask2d.crop_window(depth.shape, hint, crop_size)
    crop = depth[rows, cols]
    near = mask2d.adaptive_depth_threshold(crop)
    skeleton = mask2d.skeletonize(near)
    r, c = mask2d.tip_pixel(skeleton, (hint[0] - rows.start, hint[1] - cols.start))
    return r + rows.start, c + cols.start


def refine_tip(depth, camera, estimate, tip_side, crop_size=200, snap_tolerance=None):
    """Tip position on the estimated needle circle, located in the image."""
    pixel = locate_tip_pixel(depth, camera, estimate, tip_side, crop_size)
    ray = camera.pixel_ray(pixel)
    return ray_circle_intersection(ray, estimate.circle, snap_tolerance)


def raw_tip(depth, camera, pixel):
    """Tip from deprojecting one pixel with its own (noisy) depth."""
    depth = np.asarray(depth, dtype=float)
    r, c = pixel
    z = depth[r, c]
    if not (np.isfinite(z) and z != 0):
        win = depth[max(r - 1, 0):r + 2, max(c - 1, 0):c + 2]
        ok = win[mask2d.valid_depth(win)]
        if ok.size == 0:
            raise NotVisible("no valid depth around the tip pixel")
        z = float(np.median(ok))
    return camera.deproject(pixel, z)


def endpoint_errors(estimate, truth):
    """Distances (left, right) between matching endpoints."""
    return (
        float(np.linalg.norm(estimate.endpoint_left - truth.endpoint_left)),
        float(np.linalg.norm(estimate.endpoint_right - truth.endpoint_right)),
    )


__all__ = [
    "NeedleMeasurement", "EkfConfig", "EkfState", "NeedleEstimate", "measure_needle",
    "ekf_initialize", "ekf_update", "estimate_needle", "refine_tip", "locate_tip_pixel",
    "raw_tip", "project_tip", "label_endpoints", "arc_normal", "endpoint_errors",
]
