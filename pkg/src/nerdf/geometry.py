"""Cameras, rays, pose sampling, and ray-point sampling.

Coordinate conventions (used everywhere, defined only here):
  * World and camera frames are right-handed.
  * In camera space the optical axis is +z, +x points right in the image,
    +y points down.  A pixel (px, py) maps to the camera-space direction
    ((px - cx) / fx, (py - cy) / fy, 1) before normalization.
  * `CameraPose.orientation` is the camera-to-world rotation: its columns
    are the camera axes expressed in world coordinates.

All types are immutable after construction and safe to share between
workers; randomness always flows through an explicit numpy Generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError

_UNIT_TOL = 1e-6


def _as_vec3(v) -> np.ndarray:
    a = np.asarray(v, dtype=np.float64)
    if a.shape != (3,):
        raise InputError(f"expected a 3-vector, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class Ray:
    """A camera ray r(t) = origin + t * dir on the segment [t_near, t_far]."""

    origin: np.ndarray
    dir: np.ndarray
    t_near: float
    t_far: float

    def __post_init__(self):
        object.__setattr__(self, "origin", _as_vec3(self.origin))
        object.__setattr__(self, "dir", _as_vec3(self.dir))
        if abs(np.linalg.norm(self.dir) - 1.0) > _UNIT_TOL:
            raise InputError(f"ray direction must be unit length, |d| = {np.linalg.norm(self.dir):.8f}")
        if self.t_near < 0 or not self.t_far > self.t_near:
            raise InputError(f"require 0 <= t_near < t_far, got [{self.t_near}, {self.t_far}]")

    def point_at(self, t):
        t = np.asarray(t, dtype=np.float64)
        return self.origin + t[..., None] * self.dir


@dataclass(frozen=True)
class CameraPose:
    """Pinhole camera: world position, camera-to-world rotation, intrinsics."""

    position: np.ndarray
    orientation: np.ndarray  # (3, 3), columns = camera x/y/z axes in world
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        object.__setattr__(self, "position", _as_vec3(self.position))
        r = np.asarray(self.orientation, dtype=np.float64)
        if r.shape != (3, 3):
            raise InputError(f"orientation must be 3x3, got {r.shape}")
        if not np.allclose(r @ r.T, np.eye(3), atol=_UNIT_TOL):
            raise InputError("orientation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > _UNIT_TOL:
            raise InputError(f"orientation must have det +1, got {np.linalg.det(r):.8f}")
        object.__setattr__(self, "orientation", r)
        if self.fx <= 0 or self.fy <= 0:
            raise InputError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise InputError("principal point must lie inside the image")


@dataclass(frozen=True)
class PoseRegion:
    """The pose neighbourhood that online view sampling draws from."""

    poses: tuple
    position_jitter: float = 0.0
    orientation_jitter: float = 0.0  # radians

    def __post_init__(self):
        object.__setattr__(self, "poses", tuple(self.poses))
        if len(self.poses) < 1:
            raise InputError("PoseRegion needs at least one pose")
        if self.position_jitter < 0 or self.orientation_jitter < 0:
            raise InputError("jitter values must be >= 0")


# ---------------------------------------------------------------------------
# rays


def pixel_dirs(pose: CameraPose, px, py) -> np.ndarray:
    """World-space unit directions for (sub-)pixel coordinates, vectorized."""
    px = np.asarray(px, dtype=np.float64)
    py = np.asarray(py, dtype=np.float64)
    if np.any(px < 0) or np.any(px >= pose.width) or np.any(py < 0) or np.any(py >= pose.height):
        raise InputError(f"pixel out of range for {pose.width}x{pose.height} image")
    cam = np.stack(
        [(px - pose.cx) / pose.fx, (py - pose.cy) / pose.fy, np.ones_like(px)], axis=-1
    )
    world = cam @ pose.orientation.T
    return world / np.linalg.norm(world, axis=-1, keepdims=True)


def ray_from_pixel(pose: CameraPose, px: float, py: float, t_near: float, t_far: float) -> Ray:
    d = pixel_dirs(pose, np.float64(px), np.float64(py))
    return Ray(pose.position, d, t_near, t_far)


def pixel_grid_rays(pose: CameraPose, t_near: float, t_far: float):
    """Rays through all pixel centers, row-major. Returns (origins, dirs), each (h*w, 3)."""
    xs = np.arange(pose.width, dtype=np.float64) + 0.5
    ys = np.arange(pose.height, dtype=np.float64) + 0.5
    px, py = np.meshgrid(xs, ys)  # (h, w)
    dirs = pixel_dirs(pose, px.ravel(), py.ravel())
    origins = np.broadcast_to(pose.position, dirs.shape)
    return origins, dirs


# ---------------------------------------------------------------------------
# t-sampling along rays


def stratified_samples(ray: Ray, n: int, rng: np.random.Generator) -> np.ndarray:
    """One uniform draw per bin of an n-bin partition of [t_near, t_far)."""
    if n < 1:
        raise InputError("need n >= 1 samples")
    return stratified_matrix(ray.t_near, ray.t_far, n, 1, rng)[0]


def stratified_matrix(t_near: float, t_far: float, n: int, rows: int, rng: np.random.Generator) -> np.ndarray:
    """(rows, n) stratified t-values; row i is an independent stratified draw."""
    if n < 1:
        raise InputError("need n >= 1 samples")
    step = (t_far - t_near) / n
    u = rng.random((rows, n))
    return t_near + (np.arange(n) + u) * step


def uniform_samples(ray: Ray, s: int) -> np.ndarray:
    return uniform_midpoints(ray.t_near, ray.t_far, s)


def uniform_midpoints(t_near: float, t_far: float, s: int) -> np.ndarray:
    """Midpoints of s equal bins over [t_near, t_far]; deterministic."""
    if s < 2:
        raise InputError("need s >= 2 samples")
    step = (t_far - t_near) / s
    return t_near + (np.arange(s) + 0.5) * step


# ---------------------------------------------------------------------------
# quaternions (w, x, y, z) for pose interpolation


def quat_from_rot(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    t = np.trace(r)
    if t > 0:
        s = math.sqrt(t + 1.0) * 2
        q = np.array([0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s])
    else:
        i = int(np.argmax(np.diag(r)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = math.sqrt(max(1e-12, 1.0 + r[i, i] - r[j, j] - r[k, k])) * 2
        q = np.empty(4)
        q[0] = (r[k, j] - r[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (r[j, i] + r[i, j]) / s
        q[1 + k] = (r[k, i] + r[i, k]) / s
    return q / np.linalg.norm(q)


def rot_from_quat(q: np.ndarray) -> np.ndarray:
    w, x, y, z = np.asarray(q, dtype=np.float64) / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_slerp(qa: np.ndarray, qb: np.ndarray, u: float) -> np.ndarray:
    qa = np.asarray(qa, dtype=np.float64)
    qb = np.asarray(qb, dtype=np.float64)
    dot = float(np.dot(qa, qb))
    if dot < 0:  # take the short arc
        qb, dot = -qb, -dot
    if dot > 1 - 1e-10:
        q = qa + u * (qb - qa)
        return q / np.linalg.norm(q)
    theta = math.acos(min(1.0, dot))
    return (math.sin((1 - u) * theta) * qa + math.sin(u * theta) * qb) / math.sin(theta)


def rot_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = _as_vec3(axis)
    n = np.linalg.norm(axis)
    if n == 0:
        return np.eye(3)
    x, y, z = axis / n
    c, s = math.cos(angle), math.sin(angle)
    cc = 1 - c
    return np.array(
        [
            [c + x * x * cc, x * y * cc - z * s, x * z * cc + y * s],
            [y * x * cc + z * s, c + y * y * cc, y * z * cc - x * s],
            [z * x * cc - y * s, z * y * cc + x * s, c + z * z * cc],
        ]
    )


# ---------------------------------------------------------------------------
# pose construction and online view sampling


def look_at_pose(position, target, up, fx, fy, cx, cy, width, height) -> CameraPose:
    """Pose at `position` whose optical axis points at `target`."""
    position = _as_vec3(position)
    forward = _as_vec3(target) - position
    n = np.linalg.norm(forward)
    if n < 1e-12:
        raise InputError("look-at target coincides with the camera position")
    forward = forward / n
    down = -_as_vec3(up)
    right = np.cross(down, forward)
    rn = np.linalg.norm(right)
    if rn < 1e-12:
        raise InputError("up vector is parallel to the viewing direction")
    right /= rn
    down = np.cross(forward, right)
    r = np.stack([right, down, forward], axis=1)
    return CameraPose(position, r, fx, fy, cx, cy, width, height)


def interpolate_pose(a: CameraPose, b: CameraPose, u: float) -> CameraPose:
    """Convex position blend + orientation slerp; intrinsics come from `a`."""
    pos = (1 - u) * a.position + u * b.position
    q = quat_slerp(quat_from_rot(a.orientation), quat_from_rot(b.orientation), u)
    return CameraPose(pos, rot_from_quat(q), a.fx, a.fy, a.cx, a.cy, a.width, a.height)


def sample_pose_ovs(region: PoseRegion, rng: np.random.Generator) -> CameraPose:
    """Random pose: blend two training poses, then jitter position and orientation."""
    n = len(region.poses)
    i, j = rng.integers(0, n, size=2)
    u = float(rng.random())
    base = interpolate_pose(region.poses[i], region.poses[j], u)

    pos = base.position
    if region.position_jitter > 0:
        v = rng.normal(size=3)
        v /= max(np.linalg.norm(v), 1e-12)
        pos = pos + v * (region.position_jitter * float(rng.random()))

    rot = base.orientation
    if region.orientation_jitter > 0:
        axis = rng.normal(size=3)
        angle = region.orientation_jitter * float(rng.random())
        rot = rot_from_axis_angle(axis, angle) @ rot

    return CameraPose(pos, rot, base.fx, base.fy, base.cx, base.cy, base.width, base.height)
