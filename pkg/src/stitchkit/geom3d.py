"""3D primitives and robust fitting.

Points are numpy arrays in millimetres; clouds are ``(N, 3)`` float arrays.
Every fit is a pure function of its inputs, with randomness coming only from
``RansacConfig.seed``.
"""

from dataclasses import dataclass
import math

import numpy as np

from . import kernels
from .errors import (
    DegenerateInput,
    NoConsensus,
    NonParallel,
    NotACircle,
    RayParallel,
    TipUnresolved,
)


def as_point(p):
    a = np.asarray(p, dtype=float).reshape(3)
    if not np.all(np.isfinite(a)):
        raise DegenerateInput(f"non-finite point {a}")
    return a


def as_cloud(points):
    a = np.asarray(points, dtype=float)
    if a.ndim == 1 and a.size == 0:
        a = a.reshape(0, 3)
    if a.ndim != 2 or a.shape[1] != 3:
        raise DegenerateInput(f"expected an (N, 3) cloud, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DegenerateInput("cloud contains non-finite coordinates")
    return a


def unit(v):
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if not np.isfinite(n) or n < 1e-12:
        raise DegenerateInput("cannot normalise a zero-length vector")
    return v / n


def canonical_sign(v, view_dir=None):
    """Flip ``v`` so it faces ``view_dir``, else so its largest component is positive."""
    v = np.asarray(v, dtype=float)
    if view_dir is not None:
        d = float(np.dot(v, view_dir))
        if d != 0.0:
            return v if d > 0 else -v
    k = int(np.argmax(np.abs(v)))
    return v if v[k] >= 0 else -v


def orthonormal_basis(normal):
    """Two unit vectors spanning the plane orthogonal to ``normal``."""
    n = unit(normal)
    k = int(np.argmin(np.abs(n)))
    e = np.zeros(3)
    e[k] = 1.0
    u = unit(np.cross(n, e))
    v = np.cross(n, u)
    return u, v


@dataclass(frozen=True)
class Plane:
    """``{p : normal . p = offset}``."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        object.__setattr__(self, "normal", unit(self.normal))
        object.__setattr__(self, "offset", float(self.offset))

    def signed_distance(self, points):
        return np.asarray(points, dtype=float) @ self.normal - self.offset

    def point(self):
        """The plane point closest to the origin."""
        return self.normal * self.offset

    def flipped(self):
        return Plane(-self.normal, -self.offset)

    @classmethod
    def from_point_normal(cls, point, normal):
        n = unit(normal)
        return cls(n, float(np.dot(n, as_point(point))))


@dataclass(frozen=True)
class Line3:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "origin", as_point(self.origin))
        object.__setattr__(self, "direction", unit(self.direction))

    def distance(self, points):
        d = np.asarray(points, dtype=float) - self.origin
        along = d @ self.direction
        return np.linalg.norm(d - np.outer(along, self.direction), axis=1)

    def parameter(self, points):
        return (np.asarray(points, dtype=float) - self.origin) @ self.direction

    def at(self, s):
        return self.origin + float(s) * self.direction


@dataclass(frozen=True)
class Circle3:
    center: np.ndarray
    normal: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        object.__setattr__(self, "normal", unit(self.normal))
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise NotACircle(f"radius must be positive, got {self.radius}")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def plane(self):
        return Plane.from_point_normal(self.center, self.normal)


@dataclass(frozen=True)
class Ray3:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "origin", as_point(self.origin))
        object.__setattr__(self, "direction", unit(self.direction))


@dataclass(frozen=True)
class RansacConfig:
    """RANSAC settings.

    ``min_inliers=None`` means ``max(20, ceil(0.3 * N))`` capped at ``N``.
    """

    iterations: int = 500
    inlier_threshold: float = 0.5
    min_inliers: int | None = None
    seed: int = 0

    def __post_init__(self):
        if int(self.iterations) < 1:
            raise ValueError("iterations must be >= 1")
        if not self.inlier_threshold > 0:
            raise ValueError("inlier_threshold must be > 0")
        if self.min_inliers is not None and int(self.min_inliers) < 1:
            raise ValueError("min_inliers must be positive")

    def required_inliers(self, n_points, model_minimum):
        if self.min_inliers is None:
            need = min(n_points, max(20, math.ceil(0.3 * n_points)))
        else:
            need = int(self.min_inliers)
        return max(need, model_minimum)


def _plane_svd(points):
    centroid = points.mean(axis=0)
    _, s, vt = np.linalg.svd(points - centroid, full_matrices=False)
    return centroid, vt[-1], s


def ransac_fit_plane(points, cfg=RansacConfig(), view_dir=None):
    """Robust plane fit; returns ``(plane, inlier_indices)``.

    Triplets are drawn with replacement and degenerate draws are skipped.
    The winning consensus set is refit by total least squares and the inliers
    are re-evaluated against the refined plane.
    """
    pts = as_cloud(points)
    n = len(pts)
    if n < 3:
        raise DegenerateInput(f"plane fit needs >= 3 points, got {n}")
    rng = np.random.default_rng(cfg.seed)
    idx = rng.integers(0, n, size=(int(cfg.iterations), 3))
    a, b, c = pts[idx[:, 0]], pts[idx[:, 1]], pts[idx[:, 2]]
    normals = np.cross(b - a, c - a)
    norms = np.linalg.norm(normals, axis=1)
    scale = np.maximum(np.linalg.norm(b - a, axis=1) * np.linalg.norm(c - a, axis=1), 1e-300)
    ok = norms > 1e-9 * scale
    if not ok.any():
        raise DegenerateInput("all sampled triplets are collinear")
    normals = normals[ok] / norms[ok, None]
    offsets = np.einsum("ij,ij->i", normals, a[ok])
    counts = np.empty(len(normals), dtype=np.int64)
    for start in range(0, len(normals), 128):
        blk = slice(start, start + 128)
        dist = np.abs(pts @ normals[blk].T - offsets[blk])
        counts[blk] = (dist <= cfg.inlier_threshold).sum(axis=0)
    best = int(np.argmax(counts))
    need = cfg.required_inliers(n, 3)
    if counts[best] < need:
        raise NoConsensus(f"best plane has {counts[best]} inliers, need {need}")
    inliers = np.flatnonzero(np.abs(pts @ normals[best] - offsets[best]) <= cfg.inlier_threshold)
    centroid, normal, _ = _plane_svd(pts[inliers])
    normal = canonical_sign(normal, view_dir)
    plane = Plane(normal, float(normal @ centroid))
    inliers = np.flatnonzero(np.abs(plane.signed_distance(pts)) <= cfg.inlier_threshold)
    if len(inliers) < need:
        raise NoConsensus(f"refined plane keeps {len(inliers)} inliers, need {need}")
    return plane, inliers


def ransac_fit_line(points, cfg=RansacConfig()):
    """Robust line fit; returns ``(line, inlier_indices)``."""
    pts = as_cloud(points)
    n = len(pts)
    if n < 2:
        raise DegenerateInput(f"line fit needs >= 2 points, got {n}")
    rng = np.random.default_rng(cfg.seed)
    idx = rng.integers(0, n, size=(int(cfg.iterations), 2))
    a, b = pts[idx[:, 0]], pts[idx[:, 1]]
    dirs = b - a
    lens = np.linalg.norm(dirs, axis=1)
    ok = lens > 1e-9
    if not ok.any():
        raise DegenerateInput("all sampled point pairs coincide")
    dirs = dirs[ok] / lens[ok, None]
    a = a[ok]
    counts = np.empty(len(dirs), dtype=np.int64)
    for k in range(len(dirs)):
        d = pts - a[k]
        along = d @ dirs[k]
        dist2 = np.einsum("ij,ij->i", d, d) - along * along
        counts[k] = (dist2 <= cfg.inlier_threshold ** 2).sum()
    best = int(np.argmax(counts))
    need = cfg.required_inliers(n, 2)
    if counts[best] < need:
        raise NoConsensus(f"best line has {counts[best]} inliers, need {need}")
    seed_line = Line3(a[best], dirs[best])
    inliers = np.flatnonzero(seed_line.distance(pts) <= cfg.inlier_threshold)
    sub = pts[inliers]
    centroid = sub.mean(axis=0)
    _, _, vt = np.linalg.svd(sub - centroid, full_matrices=False)
    line = Line3(centroid, canonical_sign(vt[0]))
    inliers = np.flatnonzero(line.distance(pts) <= cfg.inlier_threshold)
    if len(inliers) < need:
        raise NoConsensus(f"refined line keeps {len(inliers)} inliers, need {need}")
    return line, inliers


def project_point_to_plane(p, plane):
    p = np.asarray(p, dtype=float)
    d = plane.signed_distance(p)
    return p - np.multiply.outer(d, plane.normal)


def fit_circle_in_plane(points, plane, refine=False):
    """Algebraic (Kasa) circle fit in the 2D coordinates of ``plane``.

    Points are projected onto the plane first. With ``refine=True`` the
    algebraic solution seeds a geometric least-squares refinement.
    """
    pts = as_cloud(points)
    if len(pts) < 3:
        raise NotACircle(f"circle fit needs >= 3 points, got {len(pts)}")
    proj = project_point_to_plane(pts, plane)
    u, v = orthonormal_basis(plane.normal)
    origin = proj.mean(axis=0)
    rel = proj - origin
    x, y = rel @ u, rel @ v
    design = np.column_stack([2 * x, 2 * y, np.ones_like(x)])
    sv = np.linalg.svd(design, compute_uv=False)
    if sv[-1] <= 1e-10 * sv[0]:
        raise NotACircle("points are collinear in the plane")
    rhs = x * x + y * y
    (a, b, c), *_ = np.linalg.lstsq(design, rhs, rcond=None)
    r2 = c + a * a + b * b
    if not np.isfinite(r2) or r2 <= 0:
        raise NotACircle(f"non-positive squared radius {r2}")
    r = math.sqrt(r2)
    if refine:
        from scipy.optimize import least_squares

        def resid(q):
            return np.hypot(x - q[0], y - q[1]) - q[2]

        a, b, r = least_squares(resid, [a, b, r], method="lm").x
        r = abs(r)
    if not (np.isfinite(r) and r > 0):
        raise NotACircle(f"bad radius {r}")
    center = origin + a * u + b * v
    return Circle3(center, plane.normal, r)


def farthest_pair(points):
    """The two points with maximal separation, lexicographically ordered."""
    pts = as_cloud(points)
    if len(pts) < 2:
        raise DegenerateInput(f"farthest pair needs >= 2 points, got {len(pts)}")
    i, j = kernels.farthest_pair(pts)
    return pts[i].copy(), pts[j].copy()


def ray_circle_intersection(ray, circle, snap_tolerance=None):
    """Hit the circle's plane with ``ray`` and snap the hit onto the rim.

    ``snap_tolerance`` defaults to a quarter of the radius.
    """
    if snap_tolerance is None:
        snap_tolerance = 0.25 * circle.radius
    denom = float(np.dot(circle.normal, ray.direction))
    if abs(denom) < math.sin(1e-6):
        raise RayParallel("ray is parallel to the circle plane")
    t = float(np.dot(circle.normal, circle.center - ray.origin)) / denom
    if t < 0:
        raise TipUnresolved("circle plane lies behind the ray origin")
    hit = ray.origin + t * ray.direction
    radial = hit - circle.center
    radial = radial - np.dot(radial, circle.normal) * circle.normal
    rho = float(np.linalg.norm(radial))
    if abs(rho - circle.radius) > snap_tolerance:
        raise TipUnresolved(
            f"plane hit is {abs(rho - circle.radius):.3f} mm from the rim "
            f"(tolerance {snap_tolerance:.3f})"
        )
    if rho < 1e-12:
        raise TipUnresolved("plane hit is at the circle centre")
    return circle.center + circle.radius * radial / rho


def angle_between_normals(a, b):
    """Angle in degrees between two plane normals, ignoring orientation."""
    c = min(1.0, abs(float(np.dot(a, b))))
    return math.degrees(math.acos(c))


def plane_plane_distance(a, b, max_angle=10.0):
    ang = angle_between_normals(a.normal, b.normal)
    if ang > max_angle:
        raise NonParallel(f"planes are {ang:.2f} deg apart (max {max_angle})")
    return abs(float(a.normal @ b.point()) - a.offset)


def rotation_about_axis(axis, angle):
    """Rodrigues rotation matrix for ``angle`` radians about ``axis``."""
    k = unit(axis)
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + math.sin(angle) * kx + (1 - math.cos(angle)) * (kx @ kx)


def rotation_between(a, b):
    """Minimal rotation taking unit vector ``a`` onto unit vector ``b``."""
    a, b = unit(a), unit(b)
    axis = np.cross(a, b)
    s = np.linalg.norm(axis)
    c = float(np.clip(np.dot(a, b), -1.0, 1.0))
    if s < 1e-15:
        if c > 0:
            return np.eye(3)
        u, _ = orthonormal_basis(a)
        return rotation_about_axis(u, math.pi)
    return rotation_about_axis(axis, math.atan2(s, c))


def is_rotation(m, tol=1e-9):
    m = np.asarray(m, dtype=float)
    return (
        m.shape == (3, 3)
        and np.allclose(m.T @ m, np.eye(3), atol=tol, rtol=0)
        and abs(np.linalg.det(m) - 1.0) <= tol
    )


@dataclass(frozen=True)
class Pose:
    """Rigid transform: ``x_world = orientation @ x_local + position``."""

    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", as_point(self.position))
        r = np.asarray(self.orientation, dtype=float).reshape(3, 3)
        if not is_rotation(r):
            raise ValueError("orientation is not a proper rotation")
        object.__setattr__(self, "orientation", r)

    @classmethod
    def identity(cls):
        return cls(np.zeros(3), np.eye(3))

    def apply(self, points):
        p = np.asarray(points, dtype=float)
        return p @ self.orientation.T + self.position

    def rotate(self, vectors):
        return np.asarray(vectors, dtype=float) @ self.orientation.T

    def inverse(self):
        rt = self.orientation.T
        return Pose(-rt @ self.position, rt)

    def compose(self, other):
        """``self`` after ``other``."""
        return Pose(self.apply(other.position), self.orientation @ other.orientation)
