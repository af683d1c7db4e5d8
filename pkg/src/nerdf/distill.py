"""Knowledge-distillation training: render loss, density constraint, view sampling.

Each iteration draws a batch of rays sharing one view origin, renders them
through the teacher for ground truth (pixel rgb plus the density samples
along the ray), runs one network forwarding per ray through the student,
and descends the composite objective

    L = mean_rays |C_student - C_teacher|^2
      + lambda * mean_rays sum_t (sigma_hat_student - sigma_hat_teacher)^2

where sigma_hat is the per-ray sum-normalized density.  Loss reduction is
a mean over rays so the learning rate is decoupled from batch size.

The same loop trains the direct-rgb baseline (3-channel sigmoid head, no
distribution, render loss only) for the capacity-matched ablation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit as sigmoid

from .config import SceneConfig
from .distribution import RenderConfig, basis_matrix, render_head_backward, render_head_forward
from .encoding import EncodingConfig, encode_rays
from .errors import DivergenceError, InputError, StructuralError
from .field import teacher_render_rays
from .geometry import pixel_dirs, sample_pose_ovs, uniform_midpoints
from .nn import adam_step, init_adam, init_mlp, mlp_backward, mlp_forward

_EPS = 1e-8


@dataclass(frozen=True)
class DistillConfig:
    batch_directions: int = 2048
    lambda_vdc: float = 0.1
    iterations: int = 50_000
    seed: int = 0
    enable_vdc: bool = True
    enable_ovs: bool = True
    nelf_head: bool = False
    k: int = 12
    s_render: int = 64
    hidden_layers: int = 8
    hidden_width: int = 384
    lr: float = 5e-4
    pe_frequencies: int = 10
    sh_degree: int = 8
    n_points: int = 16
    log_every: int = 500
    checkpoint_every: int = 0  # 0 = final checkpoint only

    def __post_init__(self):
        if self.batch_directions < 1 or self.lambda_vdc < 0:
            raise InputError("require batch_directions >= 1 and lambda_vdc >= 0")


@dataclass(frozen=True)
class TrainBatch:
    """Rays sharing one origin, with teacher rgb and density supervision."""

    origins: np.ndarray  # (R, 3), all rows identical
    dirs: np.ndarray  # (R, 3)
    gt_rgb: np.ndarray  # (R, 3)
    teacher_sigma: np.ndarray  # (R, s_render), sampled at the student's points


# ---------------------------------------------------------------------------
# losses


def render_loss(pred: np.ndarray, gt: np.ndarray) -> float:
    """Mean over rays of the squared L2 color error."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise StructuralError(f"prediction {pred.shape} vs ground truth {gt.shape}")
    return float(np.mean(np.sum((pred - gt) ** 2, axis=-1)))


def _render_loss_grad(pred, gt):
    err = pred - gt
    loss = float(np.mean(np.sum(err**2, axis=-1)))
    return loss, (2.0 / pred.shape[0]) * err


def normalize_density(sigma: np.ndarray) -> np.ndarray:
    """Per-ray sum normalization: sigma_i / (sum_j sigma_j + 1e-8)."""
    sigma = np.asarray(sigma)
    if np.any(sigma < 0):
        raise InputError("densities must be nonnegative")
    return sigma / (sigma.sum(axis=-1, keepdims=True) + _EPS)


def vdc_loss(student_norm: np.ndarray, teacher_norm: np.ndarray, lam: float) -> float:
    """Density-constraint loss on already-normalized densities, mean over rays."""
    student_norm = np.atleast_2d(np.asarray(student_norm))
    teacher_norm = np.atleast_2d(np.asarray(teacher_norm))
    if student_norm.shape != teacher_norm.shape:
        raise StructuralError(f"density shapes differ: {student_norm.shape} vs {teacher_norm.shape}")
    return float(lam * np.mean(np.sum((student_norm - teacher_norm) ** 2, axis=-1)))


def _vdc_grad(student_sigma, teacher_norm, lam):
    """Loss and gradient w.r.t. the raw (unnormalized) student densities."""
    s = student_sigma.sum(axis=-1, keepdims=True) + _EPS
    shat = student_sigma / s
    diff = shat - teacher_norm
    loss = float(lam * np.mean(np.sum(diff**2, axis=-1)))
    d_shat = (2.0 * lam / student_sigma.shape[0]) * diff
    d_sigma = (d_shat - np.sum(d_shat * shat, axis=-1, keepdims=True)) / s
    return loss, d_sigma


# ---------------------------------------------------------------------------
# batches


def ovs_batch(teacher, scene_cfg: SceneConfig, cfg: DistillConfig, rng: np.random.Generator) -> TrainBatch:
    """One training batch: a sampled (or fixed) pose, B pixel rays, teacher outputs.

    With online view sampling the pose is drawn from the training-pose
    region and rays go through random sub-pixel positions; without it the
    pose is one of the fixed training poses and rays go through pixel
    centers, mimicking a pre-rendered pseudo image.
    """
    if cfg.enable_ovs:
        pose = sample_pose_ovs(scene_cfg.pose_region(), rng)
        px = rng.random(cfg.batch_directions) * pose.width
        py = rng.random(cfg.batch_directions) * pose.height
    else:
        pose = scene_cfg.train_poses[int(rng.integers(0, len(scene_cfg.train_poses)))]
        px = rng.integers(0, pose.width, size=cfg.batch_directions) + 0.5
        py = rng.integers(0, pose.height, size=cfg.batch_directions) + 0.5
    dirs = pixel_dirs(pose, px, py).astype(np.float32)
    origins = np.broadcast_to(pose.position.astype(np.float32), dirs.shape)
    gt_rgb, teacher_sigma = teacher_render_rays(
        teacher, origins, dirs, scene_cfg.t_near, scene_cfg.t_far, cfg.s_render, rng=None
    )
    return TrainBatch(origins, dirs, gt_rgb, teacher_sigma)


# ---------------------------------------------------------------------------
# one optimization step


class TrainContext:
    """Static per-run tensors shared by every step."""

    def __init__(self, scene_cfg: SceneConfig, cfg: DistillConfig, dtype=np.float32):
        self.enc = EncodingConfig(
            pe_frequencies=cfg.pe_frequencies,
            sh_degree=cfg.sh_degree,
            n_points=cfg.n_points,
            scene_radius=scene_cfg.scene_radius,
        )
        self.t_near = scene_cfg.t_near
        self.t_far = scene_cfg.t_far
        t_period = scene_cfg.t_far - scene_cfg.t_near
        ts_local = (uniform_midpoints(scene_cfg.t_near, scene_cfg.t_far, cfg.s_render) - scene_cfg.t_near)
        self.bmat = basis_matrix(ts_local.astype(dtype), cfg.k, t_period)
        self.delta = np.dtype(dtype).type(t_period / cfg.s_render)


def distill_step(params, batch: TrainBatch, opt, cfg: DistillConfig, ctx: TrainContext, rng_enc):
    """Forward all rays once, apply the composite loss, take one Adam step."""
    x = encode_rays(batch.origins, batch.dirs, ctx.t_near, ctx.t_far, ctx.enc, rng_enc, dtype=params.dtype)
    raw, tape = mlp_forward(params, x, record=True)

    if cfg.nelf_head:
        pred = sigmoid(raw)
        loss_render, d_pred = _render_loss_grad(pred, batch.gt_rgb)
        d_raw = (d_pred * pred * (1.0 - pred)).astype(raw.dtype)
        loss_vdc = 0.0
    else:
        pred, sigma, _, cache = render_head_forward(raw, ctx.bmat, ctx.delta)
        loss_render, d_pred = _render_loss_grad(pred, batch.gt_rgb)
        d_sigma_extra = None
        loss_vdc = 0.0
        if cfg.enable_vdc and cfg.lambda_vdc > 0:
            teacher_norm = normalize_density(batch.teacher_sigma)
            loss_vdc, d_sigma_extra = _vdc_grad(sigma, teacher_norm, cfg.lambda_vdc)
        d_raw = render_head_backward(cache, d_pred, d_sigma_extra).astype(raw.dtype)

    total = loss_render + loss_vdc
    if not np.isfinite(total):
        raise DivergenceError(f"non-finite loss (render={loss_render}, vdc={loss_vdc})")
    grads, _ = mlp_backward(params, tape, d_raw)
    adam_step(params, grads, opt)
    return {"render_loss": loss_render, "vdc_loss": loss_vdc, "total": total}


# ---------------------------------------------------------------------------
# full training runs


def _probe_psnr(params, cfg, ctx, scene_cfg, gt_img):
    from .distribution import render_rays
    from .geometry import pixel_grid_rays
    from .metrics import Image, psnr

    pose = scene_cfg.heldout_poses[0] if scene_cfg.heldout_poses else scene_cfg.train_poses[0]
    origins, dirs = pixel_grid_rays(pose, scene_cfg.t_near, scene_cfg.t_far)
    if cfg.nelf_head:
        x = encode_rays(origins, dirs, ctx.t_near, ctx.t_far, ctx.enc, None, dtype=params.dtype)
        raw, _ = mlp_forward(params, x)
        rgb = sigmoid(raw)
    else:
        rgb, _, _ = render_rays(
            params, origins, dirs, ctx.t_near, ctx.t_far, ctx.enc,
            RenderConfig(cfg.s_render, cfg.k), rng=None,
        )
    img = Image(pose.width, pose.height, np.clip(rgb, 0, 1).reshape(pose.height, pose.width, 3))
    return psnr(img, gt_img)


def train_student(
    scene_cfg: SceneConfig,
    cfg: DistillConfig,
    teacher=None,
    out_path=None,
    on_metrics=None,
):
    """Distill a teacher into a student network.

    `teacher` defaults to the scene's analytic field; pass a MicroNerf to
    exercise the two-network path.  Returns (params, enc, metrics) where
    metrics has one row per log interval: iteration, render_loss, vdc_loss,
    psnr_probe.  When `out_path` is set, checkpoints are written atomically
    there (every `checkpoint_every` iterations and at the end).
    """
    from .checkpoint import Checkpoint, save_checkpoint

    if teacher is None:
        teacher = scene_cfg.scene
    ctx = TrainContext(scene_cfg, cfg)
    out_dim = 3 if cfg.nelf_head else 8 * cfg.k
    sizes = [ctx.enc.input_dim] + [cfg.hidden_width] * cfg.hidden_layers + [out_dim]

    ss = np.random.SeedSequence(cfg.seed)
    seeds = ss.spawn(3)
    rng_init = np.random.default_rng(seeds[0])
    rng_batch = np.random.default_rng(seeds[1])
    rng_enc = np.random.default_rng(seeds[2])

    params = init_mlp(sizes, rng_init, dtype=np.float32, sigma_dc_bias=None if cfg.nelf_head else -1.0)
    opt = init_adam(params, lr=cfg.lr)

    probe_pose = scene_cfg.heldout_poses[0] if scene_cfg.heldout_poses else scene_cfg.train_poses[0]
    gt_probe = _teacher_image(teacher, probe_pose, scene_cfg, cfg.s_render)

    kind = "nelf" if cfg.nelf_head else "nerdf"
    metrics = []
    for it in range(cfg.iterations):
        batch = ovs_batch(teacher, scene_cfg, cfg, rng_batch)
        try:
            step = distill_step(params, batch, opt, cfg, ctx, rng_enc)
        except DivergenceError as exc:
            raise DivergenceError(f"iteration {it}, seed {cfg.seed}: {exc}") from exc
        if it % cfg.log_every == 0 or it == cfg.iterations - 1:
            row = {
                "iteration": it,
                "render_loss": step["render_loss"],
                "vdc_loss": step["vdc_loss"],
                "psnr_probe": _probe_psnr(params, cfg, ctx, scene_cfg, gt_probe),
            }
            metrics.append(row)
            if on_metrics is not None:
                on_metrics(row)
        if out_path and cfg.checkpoint_every and it and it % cfg.checkpoint_every == 0:
            save_checkpoint(out_path, Checkpoint(kind, params, ctx.enc, scene_cfg.t_near, scene_cfg.t_far))
    if out_path:
        save_checkpoint(out_path, Checkpoint(kind, params, ctx.enc, scene_cfg.t_near, scene_cfg.t_far))
    return params, ctx.enc, metrics


def train_nelf_baseline(scene_cfg: SceneConfig, cfg: DistillConfig, teacher=None, out_path=None, on_metrics=None):
    """Same encoder and trunk, 3-channel sigmoid head, render loss only."""
    return train_student(
        scene_cfg, replace(cfg, nelf_head=True, enable_vdc=False), teacher, out_path, on_metrics
    )


def _teacher_image(teacher, pose, scene_cfg: SceneConfig, s: int):
    from .geometry import pixel_grid_rays
    from .metrics import Image

    origins, dirs = pixel_grid_rays(pose, scene_cfg.t_near, scene_cfg.t_far)
    rgb, _ = teacher_render_rays(teacher, origins, dirs, scene_cfg.t_near, scene_cfg.t_far, s, rng=None)
    return Image(pose.width, pose.height, np.clip(rgb, 0, 1).reshape(pose.height, pose.width, 3))
