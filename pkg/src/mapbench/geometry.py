"""Planar rigid-body poses and relative transformations.

A pose is (x, y, theta) with theta kept in (-pi, pi]. Relative
transformations express one pose in the frame of another; they are the
building block of the trajectory error metric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    r = theta % TWO_PI
    if r > math.pi:
        r -= TWO_PI
    return r


def wrap_angles(theta: np.ndarray) -> np.ndarray:
    """Vectorized wrap into (-pi, pi]."""
    r = np.mod(theta, TWO_PI)
    return np.where(r > math.pi, r - TWO_PI, r)


@dataclass(frozen=True)
class Pose2:
    """Planar pose; theta is wrapped at construction."""

    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", wrap_angle(self.theta))


@dataclass(frozen=True)
class RelPose:
    """Relative planar transformation; dtheta is wrapped at construction."""

    dx: float
    dy: float
    dtheta: float

    def __post_init__(self):
        object.__setattr__(self, "dtheta", wrap_angle(self.dtheta))

    def translation_norm(self) -> float:
        return math.hypot(self.dx, self.dy)


def ominus(a: Pose2, b: Pose2) -> RelPose:
    """Express pose b in the frame of a (inverse motion composition).

    ominus(a, compose(a, d)) recovers d up to floating-point rounding.
    """
    dx = b.x - a.x
    dy = b.y - a.y
    c = math.cos(a.theta)
    s = math.sin(a.theta)
    return RelPose(c * dx + s * dy, -s * dx + c * dy, b.theta - a.theta)


def compose(a: Pose2, d: RelPose) -> Pose2:
    """Apply relative transformation d in the frame of pose a."""
    c = math.cos(a.theta)
    s = math.sin(a.theta)
    return Pose2(a.x + c * d.dx - s * d.dy, a.y + s * d.dx + c * d.dy, a.theta + d.dtheta)


def transform_pose(g: Pose2, p: Pose2) -> Pose2:
    """Left-compose p with the fixed rigid transform g (frame change)."""
    c = math.cos(g.theta)
    s = math.sin(g.theta)
    return Pose2(g.x + c * p.x - s * p.y, g.y + s * p.x + c * p.y, p.theta + g.theta)


def rel_ominus(a: RelPose, b: RelPose) -> RelPose:
    """ominus on relative transformations (treated as poses)."""
    dx = b.dx - a.dx
    dy = b.dy - a.dy
    c = math.cos(a.dtheta)
    s = math.sin(a.dtheta)
    return RelPose(c * dx + s * dy, -s * dx + c * dy, b.dtheta - a.dtheta)


def pair_residual(est_i: Pose2, est_j: Pose2, gt_i: Pose2, gt_j: Pose2) -> RelPose:
    """Residual between the estimated and ground-truth relative
    displacement of a pose pair: the estimated relative transformation
    expressed in the frame of the true one.

    Identity when the estimate matches the truth up to a global rigid
    transform of the whole trajectory.
    """
    return rel_ominus(ominus(gt_i, gt_j), ominus(est_i, est_j))
