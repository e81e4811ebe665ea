"""Pinhole camera with a world pose (OpenCV axes: x right, y down, z forward)."""

from dataclasses import dataclass, field

import numpy as np

from .geom3d import Pose, Ray3


@dataclass(frozen=True)
class CameraModel:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    pose: Pose = field(default_factory=Pose.identity)

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if int(self.width) < 1 or int(self.height) < 1:
            raise ValueError("resolution must be positive")

    @property
    def view_dir(self):
        return self.pose.orientation[:, 2]

    @property
    def x_axis(self):
        return self.pose.orientation[:, 0]

    def to_camera(self, points):
        return self.pose.inverse().apply(points)

    def project(self, points):
        """``(uv, depth)`` for world points; ``uv`` columns are (u=col, v=row)."""
        pc = np.atleast_2d(self.to_camera(points))
        z = pc[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = self.fx * pc[:, 0] / z + self.cx
            v = self.fy * pc[:, 1] / z + self.cy
        return np.column_stack([u, v]), z

    def pixel_of(self, point):
        """(row, col) float coordinates and camera depth of one world point."""
        uv, z = self.project(np.asarray(point, dtype=float)[None])
        return (float(uv[0, 1]), float(uv[0, 0])), float(z[0])

    def pixel_ray(self, pixel):
        """World ray through the centre of pixel ``(row, col)``."""
        row, col = pixel
        d_cam = np.array([(col - self.cx) / self.fx, (row - self.cy) / self.fy, 1.0])
        return Ray3(self.pose.position, self.pose.rotate(d_cam))

    def deproject(self, pixel, depth):
        """World point at camera depth ``depth`` along the pixel's ray."""
        row, col = pixel
        p_cam = np.array([(col - self.cx) / self.fx * depth, (row - self.cy) / self.fy * depth, depth])
        return self.pose.apply(p_cam)

    def to_dict(self):
        return {
            "fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
            "width": int(self.width), "height": int(self.height),
            "rotation": self.pose.orientation.tolist(),
            "translation": self.pose.position.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        pose = Pose(
            np.asarray(d.get("translation", [0, 0, 0]), dtype=float),
            np.asarray(d.get("rotation", np.eye(3)), dtype=float),
        )
        return cls(float(d["fx"]), float(d["fy"]), float(d["cx"]), float(d["cy"]),
                   int(d.get("width", 640)), int(d.get("height", 480)), pose)


def look_at(eye, target, up=(0.0, 0.0, 1.0)):
    """Camera pose at ``eye`` looking at ``target`` with image-up near ``up``."""
    eye = np.asarray(eye, dtype=float)
    z = np.asarray(target, dtype=float) - eye
    z /= np.linalg.norm(z)
    x = np.cross(z, np.asarray(up, dtype=float))
    if np.linalg.norm(x) < 1e-9:
        x = np.cross(z, [0.0, 1.0, 0.0])
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return Pose(eye, np.column_stack([x, y, z]))
