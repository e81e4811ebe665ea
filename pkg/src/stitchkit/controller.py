"""Waypoint and alignment math for the two-gripper suturing cycle.

Waypoint poses for g1 during insertion are needle poses (the gripper holds
the needle rigidly); sweep waypoints are gripper poses with the tool axis
pointing down the wound normal. Alignment results are rotations applied
about the needle centre: ``x' = R (x - center) + center``.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import (
    ArcTooShort,
    DegenerateEstimate,
    IndexOutOfRange,
    InvalidConfig,
    InvalidLength,
    MisalignedStart,
    ZeroWidth,
)
from .geom3d import Pose, rotation_about_axis, rotation_between, unit

GRASP_ARC_OFFSET = 2.0


@dataclass(frozen=True)
class Waypoint:
    gripper: str
    pose: Pose
    grip: str
    label: str
    after: str | None = None

    @property
    def id(self):
        return f"{self.gripper}:{self.label}"

    def to_dict(self):
        return {
            "id": self.id,
            "gripper": self.gripper,
            "position": self.pose.position.tolist(),
            "rotation": self.pose.orientation.ravel().tolist(),
            "grip": self.grip,
            "label": self.label,
            "after": self.after,
        }


@dataclass(frozen=True)
class NeedleGrasp:
    grasp_point: np.ndarray
    approach_dir: np.ndarray
    arc_offset: float


def cinch_translation(n, i, d):
    """Thread pull for suture ``i`` of ``n``: ``n*d - (i-1)*d``."""
    if int(n) != n or int(i) != i or n < 1 or not 1 <= i <= n:
        raise IndexOutOfRange(f"suture index {i} outside 1..{n}")
    if not d > 0:
        raise InvalidLength(f"thread length must be positive, got {d}")
    return n * d - (i - 1) * d


def needle_frame(needle):
    """Needle pose: origin at the centre, z along the normal, x from left to right."""
    z = unit(needle.normal)
    chord = needle.endpoint_right - needle.endpoint_left
    x = chord - (chord @ z) * z
    if np.linalg.norm(x) < 1e-9:
        raise DegenerateEstimate("needle endpoints coincide")
    x = unit(x)
    return Pose(needle.center, np.column_stack([x, np.cross(z, x), z]))


def carry(needle, start, end):
    """Move ``needle`` rigidly with a gripper going from pose ``start`` to ``end``."""
    return needle.transformed(end.compose(start.inverse()))


def _rotate_about_point(pose, rot, point):
    return Pose(rot @ (pose.position - point) + point, rot @ pose.orientation)


@dataclass(frozen=True)
class InsertionConfig:
    rotation_deg: float = 40.0
    advance: float = 2.0
    start_tolerance: float = 1.0
    tip_side: str = "right"
    side_sign: int = -1


def insertion_trajectory(needle, insertion_point, model, cfg=InsertionConfig()):
    """Translate one wound width, twist about the centreline, advance, release."""
    if not model.width > 0:
        raise ZeroWidth(f"wound width {model.width}")
    insertion_point = np.asarray(insertion_point, dtype=float)
    tip = needle.endpoint(cfg.tip_side)
    gap = float(np.linalg.norm(tip - insertion_point))
    if gap > cfg.start_tolerance:
        raise MisalignedStart(f"tip is {gap:.3f} mm from the insertion point")
    travel = -cfg.side_sign * model.width_dir
    axis = model.centerline.direction
    # rotation axis runs along the centreline through this suture's centred position
    s = model.centerline.parameter(insertion_point[None])[0]
    pivot = model.centerline.at(s)

    p0 = needle_frame(needle)
    p1 = Pose(p0.position + model.width * travel, p0.orientation)
    tip1 = tip + model.width * travel
    swing = float(np.cross(axis, tip1 - pivot) @ model.up)
    if abs(swing) < 1e-12:
        swing = float(np.cross(axis, tip1 - pivot) @ travel)
    angle = math.radians(cfg.rotation_deg) * (1.0 if swing >= 0 else -1.0)
    p2 = _rotate_about_point(p1, rotation_about_axis(axis, angle), pivot)
    p3 = Pose(p2.position + cfg.advance * travel, p2.orientation)
    return [
        Waypoint("g1", p0, "closed", "insert_start"),
        Waypoint("g1", p1, "closed", "insert_translate"),
        Waypoint("g1", p2, "closed", "insert_rotate"),
        Waypoint("g1", p3, "closed", "insert_advance"),
        Waypoint("g1", p3, "open", "insert_release"),
    ]


def _arc_basis(needle):
    n = unit(needle.normal)
    u = needle.endpoint_right - needle.center
    u = u - (u @ n) * n
    if np.linalg.norm(u) < 1e-12:
        raise DegenerateEstimate("right endpoint coincides with the centre")
    u = unit(u)
    return u, np.cross(n, u)


def arc_point(needle, side, arc_length):
    """Point on the needle circle ``arc_length`` mm from the ``side`` endpoint,
    moving into the needle body."""
    if not needle.radius > 0:
        raise DegenerateEstimate("needle radius must be positive")
    u, v = _arc_basis(needle)
    e = needle.endpoint(side) - needle.center
    theta = math.atan2(float(e @ v), float(e @ u))
    if side == "left":
        if theta < 0:
            theta += 2 * math.pi
        theta -= arc_length / needle.radius
    else:
        theta += arc_length / needle.radius
    return needle.center + needle.radius * (math.cos(theta) * u + math.sin(theta) * v)


def _grasp(needle, side, offset):
    if not needle.radius > 0 or math.pi * needle.radius <= offset:
        raise ArcTooShort(f"half-circumference {math.pi * needle.radius:.3f} mm <= {offset} mm")
    return NeedleGrasp(arc_point(needle, side, offset), unit(needle.normal), float(offset))


def extraction_grasp(estimate, tip_side, offset=GRASP_ARC_OFFSET):
    """Grasp on the needle body ``offset`` mm of arc behind the tip."""
    return _grasp(estimate, tip_side, offset)


def handover_grasp(estimate, thread_side, offset=GRASP_ARC_OFFSET):
    """Grasp ``offset`` mm of arc from the endpoint carrying the thread."""
    return _grasp(estimate, thread_side, offset)


def _min_angle(axis, vec, w, value):
    """Smallest |psi| with ``w . R(axis, psi) vec == value``."""
    a = unit(axis)
    par = float(vec @ a)
    perp = vec - par * a
    c = par * float(w @ a)
    A = float(w @ perp)
    B = float(w @ np.cross(a, perp))
    rho = math.hypot(A, B)
    rhs = value - c
    if rho < 1e-12 or abs(rhs) > rho * (1 + 1e-12):
        raise DegenerateEstimate("rotation about the needle normal cannot reach the target")
    phi0 = math.atan2(B, A)
    delta = math.acos(max(-1.0, min(1.0, rhs / rho)))
    best = None
    for psi in (phi0 + delta, phi0 - delta):
        psi = math.remainder(psi, 2 * math.pi)
        if best is None or abs(psi) < abs(best) - 1e-15 or (abs(abs(psi) - abs(best)) <= 1e-15 and psi > best):
            best = psi
    return best


def _normal_to_centerline(estimate, model):
    if not estimate.radius > 0:
        raise DegenerateEstimate("needle radius must be positive")
    if np.linalg.norm(estimate.endpoint_right - estimate.endpoint_left) < 1e-9:
        raise DegenerateEstimate("needle endpoints coincide")
    n = unit(estimate.normal)
    d = model.centerline.direction
    target = d if n @ d >= 0 else -d
    return rotation_between(n, target), target


def handover_alignment(estimate, model):
    """Rotate the needle normal onto the centreline, then level the endpoints."""
    r1, axis = _normal_to_centerline(estimate, model)
    chord = r1 @ (estimate.endpoint_right - estimate.endpoint_left)
    psi = _min_angle(axis, chord, model.up, 0.0)
    rot = rotation_about_axis(axis, psi) @ r1 if psi != 0.0 else r1
    return Pose(estimate.center, rot)


def pre_insertion_alignment(estimate, model, tip_side="right", angle_deg=20.0):
    """Rotate the normal onto the centreline, then set the tip ``angle_deg``
    from straight down."""
    r1, axis = _normal_to_centerline(estimate, model)
    t = r1 @ (estimate.endpoint(tip_side) - estimate.center)
    value = float(np.linalg.norm(t)) * math.cos(math.radians(angle_deg))
    psi = _min_angle(axis, t, -model.up, value)
    rot = rotation_about_axis(axis, psi) @ r1 if psi != 0.0 else r1
    return Pose(estimate.center, rot)


def apply_alignment(estimate, pose):
    """The needle after rotating it by an alignment result."""
    about_center = Pose(pose.position - pose.orientation @ pose.position, pose.orientation)
    return estimate.transformed(about_center)


@dataclass(frozen=True)
class SweepConfig:
    lift: float = 15.0
    lateral: float = 20.0
    home: tuple | None = None

    def __post_init__(self):
        if not (self.lift > 0 and self.lateral > 0):
            raise InvalidConfig("lift and lateral must be positive")


def _tool_down(model):
    z = -model.up
    x = model.centerline.direction
    return np.column_stack([x, np.cross(z, x), z])


def thread_sweep_trajectory(model, position=None, cfg=SweepConfig()):
    """Coordinated sweep keeping the thread in front of the needle.

    g1 runs down the wound centre, lifts and moves aside along ``width_dir``
    and holds there through extraction; g2 starts only after g1's lateral
    move, lifts the thread on the other side and returns home.
    """
    p = model.center if position is None else np.asarray(position, dtype=float)
    rot = _tool_down(model)
    up, wd = model.up, model.width_dir
    lifted = p + cfg.lift * up
    g1 = [
        Waypoint("g1", Pose(p, rot), "closed", "sweep_descend"),
        Waypoint("g1", Pose(lifted, rot), "closed", "sweep_lift"),
        Waypoint("g1", Pose(lifted + cfg.lateral * wd, rot), "closed", "sweep_lateral"),
    ]
    g1.append(Waypoint("g1", g1[-1].pose, "closed", "hold_through_extraction"))
    home = p + 2 * cfg.lift * up if cfg.home is None else np.asarray(cfg.home, dtype=float)
    g2 = [
        Waypoint("g2", Pose(p, rot), "closed", "sweep_descend", after=g1[2].id),
        Waypoint("g2", Pose(lifted - cfg.lateral * wd, rot), "closed", "sweep_lift"),
        Waypoint("g2", Pose(home, rot), "open", "home"),
    ]
    return g1, g2
