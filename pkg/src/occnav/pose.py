"""Planar robot pose and frame transforms.

World frame: meters, x right, y up. Robot frame: x along the heading,
y to the robot's left.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError


def wrap_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    w = math.remainder(theta, 2.0 * math.pi)
    if w <= -math.pi:
        w += 2.0 * math.pi
    return w


@dataclass(frozen=True)
class Pose:
    """World-frame pose of a differential-drive robot."""

    x: float
    y: float
    theta: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.theta)):
            raise DomainError("pose coordinates must be finite")
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta], dtype=float)


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def world_to_robot(points: np.ndarray, pose: Pose) -> np.ndarray:
    """Express world-frame points in the robot frame of `pose`."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = (pts - pose.xy) @ rotation(pose.theta)  # R(-theta) @ d == d @ R(theta)
    return out if np.asarray(points).ndim == 2 else out[0]


def robot_to_world(points: np.ndarray, pose: Pose) -> np.ndarray:
    """Express robot-frame points of `pose` in the world frame."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = pts @ rotation(pose.theta).T + pose.xy
    return out if np.asarray(points).ndim == 2 else out[0]
