"""Checkpoint-agnostic rendering and held-out evaluation helpers."""

from __future__ import annotations

import numpy as np
from scipy.special import expit as sigmoid

from .checkpoint import Checkpoint
from .config import SceneConfig
from .distribution import RenderConfig, render_image, render_rays
from .encoding import encode_rays
from .errors import FormatError
from .field import MicroNerf, teacher_render_rays
from .geometry import CameraPose, pixel_dirs, pixel_grid_rays, sample_pose_ovs
from .metrics import Image, TimingBreakdown, psnr
from .nn import mlp_forward


def render_any(ckpt: Checkpoint, pose: CameraPose, s_render: int = 64):
    """Render a pose with whatever the checkpoint contains.

    Returns (Image, TimingBreakdown | None); only the distribution path
    produces a breakdown.
    """
    if ckpt.kind == "nerdf":
        rc = RenderConfig(s_render=s_render, k=ckpt.k)
        return render_image(ckpt.params, pose, ckpt.enc, rc, ckpt.t_near, ckpt.t_far)
    origins, dirs = pixel_grid_rays(pose, ckpt.t_near, ckpt.t_far)
    if ckpt.kind == "nelf":
        x = encode_rays(origins, dirs, ckpt.t_near, ckpt.t_far, ckpt.enc, None, dtype=ckpt.params.dtype)
        raw, _ = mlp_forward(ckpt.params, x)
        rgb = sigmoid(raw)
    elif ckpt.kind == "micronerf":
        field = MicroNerf(ckpt.params, ckpt.enc)
        rgb, _ = teacher_render_rays(field, origins, dirs, ckpt.t_near, ckpt.t_far, s_render, rng=None)
    else:
        raise FormatError(f"cannot render checkpoint kind {ckpt.kind!r}")
    img = Image(pose.width, pose.height, np.clip(rgb, 0, 1).reshape(pose.height, pose.width, 3))
    return img, None


def analytic_image(scene_cfg: SceneConfig, pose: CameraPose, s: int = 64) -> Image:
    origins, dirs = pixel_grid_rays(pose, scene_cfg.t_near, scene_cfg.t_far)
    rgb, _ = teacher_render_rays(
        scene_cfg.scene, origins, dirs, scene_cfg.t_near, scene_cfg.t_far, s, rng=None
    )
    return Image(pose.width, pose.height, np.clip(rgb, 0, 1).reshape(pose.height, pose.width, 3))


def heldout_psnrs(ckpt: Checkpoint, scene_cfg: SceneConfig, gt_ckpt: Checkpoint | None = None, s_render: int = 64):
    """Per-view PSNR on the held-out poses against analytic (or checkpoint) truth."""
    poses = scene_cfg.heldout_poses or scene_cfg.train_poses
    values = []
    for pose in poses:
        img, _ = render_any(ckpt, pose, s_render)
        if gt_ckpt is None:
            gt = analytic_image(scene_cfg, pose, s_render)
        else:
            gt, _ = render_any(gt_ckpt, pose, s_render)
        values.append(psnr(img, gt))
    return values


def probe_rays(scene_cfg: SceneConfig, n_rays: int, seed: int = 12345):
    """A fixed, seed-determined set of probe rays fanning out from held-out-ish poses."""
    rng = np.random.default_rng(seed)
    region = scene_cfg.pose_region()
    origins, dirs = [], []
    per_pose = max(1, n_rays // 8)
    while sum(o.shape[0] for o in origins) < n_rays:
        pose = sample_pose_ovs(region, rng)
        px = rng.random(per_pose) * pose.width
        py = rng.random(per_pose) * pose.height
        d = pixel_dirs(pose, px, py)
        dirs.append(d)
        origins.append(np.broadcast_to(pose.position, d.shape))
    origins = np.concatenate(origins)[:n_rays]
    dirs = np.concatenate(dirs)[:n_rays]
    return origins, dirs


def density_mse(params, enc, scene_cfg: SceneConfig, teacher, rc: RenderConfig, n_rays: int = 256, seed: int = 12345):
    """Teacher-student MSE between per-ray normalized densities on fixed probe rays."""
    from .distill import normalize_density

    origins, dirs = probe_rays(scene_cfg, n_rays, seed)
    _, student_sigma, _ = render_rays(
        params, origins, dirs, scene_cfg.t_near, scene_cfg.t_far, enc, rc, rng=None
    )
    _, teacher_sigma = teacher_render_rays(
        teacher, origins, dirs, scene_cfg.t_near, scene_cfg.t_far, rc.s_render, rng=None
    )
    return float(np.mean((normalize_density(student_sigma) - normalize_density(teacher_sigma)) ** 2))
