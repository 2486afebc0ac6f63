"""Depth lifting and the analytic grasp-pose proxy.

A neural grasp regressor is out of scope here; the proxy computes a
deterministic top-down pose from mask geometry: centroid position at the
median in-mask depth, gripper closing across the mask's narrow principal
extent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMask, MissingIntrinsics, NonpositiveDepth
from .scene import Intrinsics

GRIPPER_MAX_WIDTH_M = 0.085
MIN_VALID_PIXELS = 10


@dataclass(frozen=True)
class GraspPose:
    position: tuple[float, float, float]  # meters, camera frame
    yaw: float  # radians in (-pi/2, pi/2], rotation about the optical axis
    width: float  # meters
    confidence: float  # fraction of mask pixels with valid depth
    pixel: tuple[float, float]  # grasp point in image coordinates


def lift_point(u: float, v: float, z: float, intrinsics: Intrinsics) -> tuple[float, float, float]:
    """Pinhole back-projection of a pixel at depth z (meters)."""
    if intrinsics is None:
        raise MissingIntrinsics("lift_point requires camera intrinsics")
    if z <= 0:
        raise NonpositiveDepth(f"depth must be > 0, got {z}")
    x = (u - intrinsics.cx) * z / intrinsics.fx
    y = (v - intrinsics.cy) * z / intrinsics.fy
    return (x, y, z)


def project_point(x: float, y: float, z: float, intrinsics: Intrinsics) -> tuple[float, float]:
    """Inverse of lift_point."""
    if z <= 0:
        raise NonpositiveDepth(f"depth must be > 0, got {z}")
    return (x * intrinsics.fx / z + intrinsics.cx, y * intrinsics.fy / z + intrinsics.cy)


def grasp_proxy(
    mask: np.ndarray,
    depth_m: np.ndarray,
    intrinsics: Intrinsics,
    gripper_max_width: float = GRIPPER_MAX_WIDTH_M,
) -> GraspPose:
    """Top-down grasp from mask geometry.

    Position: mask centroid lifted at the median valid in-mask depth.
    Yaw: orientation of the minor principal axis (the gripper closes across
    the narrow extent); isotropic masks tie-break to 0.
    Width: minor-axis pixel extent converted to meters at the grasp depth,
    clamped to the gripper maximum.
    """
    if intrinsics is None:
        raise MissingIntrinsics("grasp_proxy requires camera intrinsics")
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != depth_m.shape:
        raise ValueError(f"mask {mask.shape} vs depth {depth_m.shape} shape mismatch")
    ys, xs = np.nonzero(mask)
    if len(xs) == 0:
        raise DegenerateMask("mask is empty")
    depths = depth_m[ys, xs]
    valid = np.isfinite(depths) & (depths > 0)
    if valid.sum() < MIN_VALID_PIXELS:
        raise DegenerateMask(
            f"only {int(valid.sum())} in-mask pixels with valid depth (< {MIN_VALID_PIXELS})"
        )
    z = float(np.median(depths[valid]))
    cu, cv = float(xs.mean()), float(ys.mean())
    position = lift_point(cu, cv, z, intrinsics)

    # principal axes from second central moments
    du = xs - cu
    dv = ys - cv
    cov = np.array([[np.mean(du * du), np.mean(du * dv)], [np.mean(du * dv), np.mean(dv * dv)]])
    eigvals, eigvecs = np.linalg.eigh(cov)
    if math.isclose(eigvals[0], eigvals[1], rel_tol=1e-9, abs_tol=1e-12):
        yaw = 0.0  # isotropic mask: any yaw works, fixed tie-break
        minor_dir = np.array([1.0, 0.0])
    else:
        minor_dir = eigvecs[:, 0]  # eigenvector of the smaller eigenvalue
        yaw = math.atan2(minor_dir[1], minor_dir[0])
    # normalize to (-pi/2, pi/2]
    while yaw <= -math.pi / 2:
        yaw += math.pi
    while yaw > math.pi / 2:
        yaw -= math.pi

    extent_px = _extent_along(du, dv, minor_dir)
    width_m = extent_px * z / intrinsics.fx
    width = min(width_m, gripper_max_width)
    confidence = float(valid.sum() / len(xs))
    return GraspPose(position=position, yaw=yaw, width=width, confidence=confidence,
                     pixel=(cu, cv))


def _extent_along(du: np.ndarray, dv: np.ndarray, direction: np.ndarray) -> float:
    proj = du * direction[0] + dv * direction[1]
    return float(proj.max() - proj.min()) + 1.0  # pixel footprint
