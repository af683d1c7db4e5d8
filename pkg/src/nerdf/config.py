"""Scene configuration: built-in desk scenes, TOML loading, pose files.

A scene config bundles everything geometric the pipeline needs: the
analytic teacher scene, camera intrinsics, ray bounds, the training /
held-out pose lists, and the jitter radii for online view sampling.
Unknown keys anywhere in a config file are rejected rather than ignored,
so a typo cannot silently change an experiment arm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

try:
    import tomllib  # py >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .errors import ConfigError
from .field import AnalyticScene, GaussianBlob
from .geometry import CameraPose, PoseRegion, look_at_pose, rot_from_quat

BUILTIN_SCENES = ("sphere", "triplet", "occluder")


@dataclass(frozen=True)
class SceneConfig:
    name: str
    scene: AnalyticScene
    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float
    t_near: float
    t_far: float
    scene_radius: float
    train_poses: tuple
    heldout_poses: tuple
    position_jitter: float
    orientation_jitter: float  # radians

    def pose_region(self) -> PoseRegion:
        return PoseRegion(self.train_poses, self.position_jitter, self.orientation_jitter)


def _ring_pose(azimuth, elevation, radius, fx, fy, cx, cy, width, height) -> CameraPose:
    pos = radius * np.array(
        [math.cos(azimuth) * math.cos(elevation), math.sin(elevation), math.sin(azimuth) * math.cos(elevation)]
    )
    return look_at_pose(pos, (0.0, 0.0, 0.0), (0.0, 1.0, 0.0), fx, fy, cx, cy, width, height)


def _desk_scene(name: str, blobs) -> SceneConfig:
    """Orbit-style scene: cameras on a ring around the origin."""
    w = h = 64
    fx = fy = 64.0
    cx = cy = 32.0
    train = tuple(
        _ring_pose(2 * math.pi * i / 12, 0.30, 4.0, fx, fy, cx, cy, w, h) for i in range(12)
    )
    heldout = tuple(
        _ring_pose(2 * math.pi * (i + 0.5) / 12, 0.30, 4.0, fx, fy, cx, cy, w, h) for i in range(0, 12, 2)
    )
    return SceneConfig(
        name=name,
        scene=AnalyticScene(tuple(blobs)),
        width=w,
        height=h,
        fx=fx,
        fy=fy,
        cx=cx,
        cy=cy,
        t_near=2.0,
        t_far=6.0,
        scene_radius=5.0,
        train_poses=train,
        heldout_poses=heldout,
        position_jitter=0.25,
        orientation_jitter=math.radians(3.0),
    )


def _forward_facing_scene(name: str, blobs, n_train=24, n_heldout=6) -> SceneConfig:
    """Forward-facing scene: cameras scattered on a disc at z ~ -4, every
    pixel covered by volume, occlusion order varying across the frame."""
    w = h = 64
    fx = fy = 48.0
    cx = cy = 32.0
    rng = np.random.default_rng(20240817)
    poses = []
    for _ in range(n_train + n_heldout):
        pos = np.array([rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-4.2, -3.8)])
        target = np.array([rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), 0.0])
        poses.append(look_at_pose(pos, target, (0.0, 1.0, 0.0), fx, fy, cx, cy, w, h))
    return SceneConfig(
        name=name,
        scene=AnalyticScene(tuple(blobs)),
        width=w,
        height=h,
        fx=fx,
        fy=fy,
        cx=cx,
        cy=cy,
        t_near=2.0,
        t_far=6.0,
        scene_radius=5.0,
        train_poses=tuple(poses[:n_train]),
        heldout_poses=tuple(poses[n_train:]),
        position_jitter=0.25,
        orientation_jitter=math.radians(3.0),
    )


def builtin_scene(name: str) -> SceneConfig:
    if name == "sphere":
        return _desk_scene(name, [GaussianBlob((0.0, 0.0, 0.0), 0.7, 4.0, (0.85, 0.35, 0.25), 0.2)])
    if name == "triplet":
        return _forward_facing_scene(
            name,
            [
                GaussianBlob((-0.8, 0.3, 0.2), 0.80, 5.0, (0.95, 0.30, 0.10), 0.5),
                GaussianBlob((0.6, -0.2, -0.4), 0.75, 6.0, (0.10, 0.85, 0.25), 0.6),
                GaussianBlob((0.0, -0.4, 0.8), 0.90, 4.0, (0.15, 0.25, 0.95), 0.4),
            ],
        )
    if name == "occluder":
        return _desk_scene(
            name,
            [
                GaussianBlob((0.0, 0.0, -0.7), 0.5, 6.0, (0.95, 0.20, 0.15), 0.0),
                GaussianBlob((0.0, 0.0, 0.7), 0.5, 6.0, (0.15, 0.30, 0.95), 0.0),
            ],
        )
    raise ConfigError(f"unknown builtin scene {name!r}; choices: {', '.join(BUILTIN_SCENES)}")


# ---------------------------------------------------------------------------
# TOML loading


def _check_keys(table: dict, allowed, where: str):
    unknown = set(table) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}")


def _pose_from_table(t: dict, cam: dict, where: str) -> CameraPose:
    _check_keys(t, {"position", "look_at", "up", "quaternion"}, where)
    if "position" not in t:
        raise ConfigError(f"{where} needs a position")
    if "quaternion" in t:
        return CameraPose(
            np.asarray(t["position"], dtype=float),
            rot_from_quat(np.asarray(t["quaternion"], dtype=float)),
            cam["fx"], cam["fy"], cam["cx"], cam["cy"], cam["width"], cam["height"],
        )
    if "look_at" not in t:
        raise ConfigError(f"{where} needs look_at or quaternion")
    return look_at_pose(
        t["position"], t["look_at"], t.get("up", (0.0, 1.0, 0.0)),
        cam["fx"], cam["fy"], cam["cx"], cam["cy"], cam["width"], cam["height"],
    )


def load_scene_config(path) -> SceneConfig:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read scene config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"scene config {path} is not valid TOML: {exc}") from exc

    _check_keys(doc, {"scene", "camera", "bounds", "view_sampling", "train_poses", "heldout_poses"}, "config root")
    for section in ("scene", "camera", "bounds", "train_poses"):
        if section not in doc:
            raise ConfigError(f"scene config is missing the [{section}] section")

    sc = doc["scene"]
    _check_keys(sc, {"name", "blobs"}, "[scene]")
    blobs = []
    for i, b in enumerate(sc.get("blobs", [])):
        _check_keys(b, {"center", "radius", "peak", "color", "tint"}, f"[[scene.blobs]] #{i}")
        blobs.append(
            GaussianBlob(b["center"], b["radius"], b["peak"], b.get("color", (1.0, 1.0, 1.0)), b.get("tint", 0.0))
        )
    if not blobs:
        raise ConfigError("scene config declares no blobs")

    cam = doc["camera"]
    _check_keys(cam, {"width", "height", "fx", "fy", "cx", "cy"}, "[camera]")
    for k in ("width", "height", "fx", "fy", "cx", "cy"):
        if k not in cam:
            raise ConfigError(f"[camera] is missing {k}")

    bounds = doc["bounds"]
    _check_keys(bounds, {"t_near", "t_far", "scene_radius"}, "[bounds]")
    vs = doc.get("view_sampling", {})
    _check_keys(vs, {"position_jitter", "orientation_jitter_deg"}, "[view_sampling]")

    train = tuple(_pose_from_table(t, cam, f"[[train_poses]] #{i}") for i, t in enumerate(doc["train_poses"]))
    heldout = tuple(
        _pose_from_table(t, cam, f"[[heldout_poses]] #{i}") for i, t in enumerate(doc.get("heldout_poses", []))
    )
    return SceneConfig(
        name=sc.get("name", "custom"),
        scene=AnalyticScene(tuple(blobs)),
        width=int(cam["width"]),
        height=int(cam["height"]),
        fx=float(cam["fx"]),
        fy=float(cam["fy"]),
        cx=float(cam["cx"]),
        cy=float(cam["cy"]),
        t_near=float(bounds["t_near"]),
        t_far=float(bounds["t_far"]),
        scene_radius=float(bounds.get("scene_radius", 1.0)),
        train_poses=train,
        heldout_poses=heldout,
        position_jitter=float(vs.get("position_jitter", 0.0)),
        orientation_jitter=math.radians(float(vs.get("orientation_jitter_deg", 0.0))),
    )


def resolve_scene(arg: str) -> SceneConfig:
    """Builtin scene name, or a path to a TOML scene config."""
    if arg in BUILTIN_SCENES:
        return builtin_scene(arg)
    import os

    if not os.path.exists(arg):
        raise ConfigError(f"scene {arg!r} is neither a builtin name nor an existing file")
    return load_scene_config(arg)


# ---------------------------------------------------------------------------
# pose files (used by render/bench and mirrored by the render service)


def pose_from_spec(spec: dict, where: str = "pose") -> CameraPose:
    """Build a CameraPose from {position, quaternion|look_at[, up], fov_deg, width, height}.

    The same conversion backs the render service, so a pose file and an
    equivalent pose message produce identical cameras.
    """
    _check_keys(spec, {"position", "quaternion", "look_at", "up", "fov_deg", "width", "height"}, where)
    for k in ("position", "fov_deg", "width", "height"):
        if k not in spec:
            raise ConfigError(f"{where} is missing {k}")
    width, height = int(spec["width"]), int(spec["height"])
    fov = float(spec["fov_deg"])
    if not 1.0 < fov < 179.0:
        raise ConfigError(f"{where}: fov_deg must lie in (1, 179)")
    fy = (height / 2.0) / math.tan(math.radians(fov) / 2.0)
    cam = {"fx": fy, "fy": fy, "cx": width / 2.0, "cy": height / 2.0, "width": width, "height": height}
    return _pose_from_table(
        {k: spec[k] for k in ("position", "quaternion", "look_at", "up") if k in spec}, cam, where
    )


def load_pose_file(path) -> CameraPose:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read pose file {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"pose file {path} is not valid TOML: {exc}") from exc
    return pose_from_spec(doc, where=str(path))


# ---------------------------------------------------------------------------
# config echo


def dump_toml(doc: dict) -> str:
    """Serialize a {str: scalar | list | {..}} dict as TOML text (echo files)."""

    def fmt(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, (int, float)):
            return repr(v)
        if isinstance(v, str):
            return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
        if isinstance(v, (list, tuple)):
            return "[" + ", ".join(fmt(x) for x in v) + "]"
        raise ConfigError(f"cannot serialize {type(v).__name__} into config echo")

    lines = []
    tables = []
    for k, v in doc.items():
        if isinstance(v, dict):
            tables.append((k, v))
        else:
            lines.append(f"{k} = {fmt(v)}")
    for name, table in tables:
        lines.append("")
        lines.append(f"[{name}]")
        for k, v in table.items():
            lines.append(f"{k} = {fmt(v)}")
    return "\n".join(lines) + "\n"
