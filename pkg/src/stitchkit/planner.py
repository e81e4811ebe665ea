"""Suture alignment: wound model from segmented clouds, then evenly spaced
insertion/extraction points along the wound centreline."""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateExtent,
    DegenerateInput,
    InvalidCount,
    InvalidModel,
    ZeroHeight,
    ZeroWidth,
)
from .geom3d import (
    Line3,
    Plane,
    RansacConfig,
    as_cloud,
    plane_plane_distance,
    project_point_to_plane,
    ransac_fit_line,
    ransac_fit_plane,
    unit,
)


@dataclass(frozen=True)
class WoundScene:
    wound_center_cloud: np.ndarray
    wound_surface_cloud: np.ndarray
    phantom_cloud: np.ndarray


@dataclass(frozen=True)
class WoundModel:
    surface_plane: Plane
    phantom_plane: Plane
    centerline: Line3
    centerline_extent: tuple
    width: float
    height: float
    width_dir: np.ndarray

    @property
    def up(self):
        return self.surface_plane.normal

    @property
    def length(self):
        return self.centerline_extent[1] - self.centerline_extent[0]

    @property
    def center(self):
        s = 0.5 * (self.centerline_extent[0] + self.centerline_extent[1])
        return self.centerline.at(s)

    def to_dict(self):
        return {
            "h": self.height,
            "w": self.width,
            "centerline": {
                "origin": self.centerline.origin.tolist(),
                "direction": self.centerline.direction.tolist(),
                "extent": list(self.centerline_extent),
            },
            "width_dir": self.width_dir.tolist(),
            "surface_plane": {"normal": self.surface_plane.normal.tolist(), "offset": self.surface_plane.offset},
            "phantom_plane": {"normal": self.phantom_plane.normal.tolist(), "offset": self.phantom_plane.offset},
        }


@dataclass(frozen=True)
class SuturePlan:
    n: int
    pairs: list
    centered_positions: list
    d: float
    model: WoundModel = field(repr=False, default=None)

    def to_dict(self):
        out = {
            "positions": [p.tolist() for p in self.centered_positions],
            "pairs": [{"insertion": a.tolist(), "extraction": b.tolist()} for a, b in self.pairs],
            "d": self.d,
            "n": self.n,
        }
        if self.model is not None:
            out.update(self.model.to_dict())
        return out


def build_wound_model(scene, cfg=RansacConfig(), max_angle=10.0, width_percentile=None):
    """Fit the raised-wound model.

    ``width_percentile=p`` measures the width as the ``p``..``100-p``
    percentile spread instead of the full min..max spread.
    """
    surface = as_cloud(scene.wound_surface_cloud)
    phantom = as_cloud(scene.phantom_cloud)
    center = as_cloud(scene.wound_center_cloud)
    if len(surface) < 3 or len(phantom) < 3 or len(center) < 2:
        raise DegenerateInput("surface/phantom need >= 3 points and wound centre >= 2")
    surface_plane, _ = ransac_fit_plane(surface, cfg)
    phantom_plane, _ = ransac_fit_plane(phantom, cfg)
    # orient both normals from the phantom towards the raised surface
    if surface_plane.signed_distance(phantom.mean(axis=0)) > 0:
        surface_plane = surface_plane.flipped()
    if phantom_plane.normal @ surface_plane.normal < 0:
        phantom_plane = phantom_plane.flipped()
    height = plane_plane_distance(surface_plane, phantom_plane, max_angle)

    projected = project_point_to_plane(center, surface_plane)
    line, inliers = ransac_fit_line(projected, cfg)
    # keep the line exactly in the surface plane
    direction = unit(line.direction - (line.direction @ surface_plane.normal) * surface_plane.normal)
    origin = project_point_to_plane(line.origin, surface_plane)
    line = Line3(origin, direction)
    s = line.parameter(projected[inliers])
    extent = (float(s.min()), float(s.max()))

    width_dir = unit(np.cross(surface_plane.normal, line.direction))
    spread = surface @ width_dir
    if width_percentile is None:
        width = float(spread.max() - spread.min())
    else:
        lo, hi = np.percentile(spread, [width_percentile, 100 - width_percentile])
        width = float(hi - lo)
    return WoundModel(surface_plane, phantom_plane, line, extent, width, height, width_dir)


def place_sutures(model, n=6):
    """``n`` positions at cell midpoints along the centreline extent."""
    if int(n) != n or n < 1:
        raise InvalidCount(f"suture count must be >= 1, got {n}")
    n = int(n)
    s_min, s_max = model.centerline_extent
    length = s_max - s_min
    if not length > 0:
        raise DegenerateExtent(f"centreline extent has length {length}")
    step = length / n
    out = []
    for i in range(1, n + 1):
        p = model.centerline.at(s_min + (i - 0.5) * step)
        out.append(project_point_to_plane(p, model.surface_plane))
    return out


def insertion_extraction_points(model, positions, side_sign=-1):
    if not model.width > 0:
        raise ZeroWidth(f"wound width {model.width}")
    if not model.height > 0:
        raise ZeroHeight(f"wound height {model.height}")
    if side_sign not in (1, -1):
        raise ValueError("side_sign must be +1 or -1")
    lateral = side_sign * 0.5 * model.width * model.width_dir
    down = 0.5 * model.height * model.surface_plane.normal
    pairs = []
    for p in positions:
        p = np.asarray(p, dtype=float)
        pairs.append((p + lateral - down, p - lateral - down))
    return pairs


def per_suture_thread_length(model, slack=5.0):
    """Thread used by one throw: across the wound plus down and up each side."""
    if not (model.width > 0 and model.height > 0):
        raise InvalidModel(f"width {model.width} and height {model.height} must be positive")
    if slack < 0:
        raise InvalidModel("slack must be >= 0")
    return model.width + 2 * model.height + slack


def plan_sutures(model, n=6, side_sign=-1, slack=5.0):
    positions = place_sutures(model, n)
    pairs = insertion_extraction_points(model, positions, side_sign)
    return SuturePlan(n, pairs, positions, per_suture_thread_length(model, slack), model)
