"""Teacher radiance fields: analytic blob scenes and a trainable point-query net.

Both teachers answer per-point (sigma, color) queries and render rays with
the classic multi-query path: s field evaluations per ray followed by the
shared compositing kernel.  That per-ray query count is exactly the cost
the distribution student removes.

Analytic scenes are sums of isotropic Gaussian density blobs with a
per-blob base color, optionally tinted by the view direction, so every
downstream quantity has cheap exact ground truth.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.special import expit as sigmoid

from .distribution import composite, composite_backward, softplus
from .encoding import EncodingConfig, positional_encode_batch, sh_encode_batch
from .errors import DivergenceError, InputError
from .geometry import CameraPose, Ray, pixel_dirs, stratified_matrix, uniform_midpoints
from .nn import MLPParams, adam_step, init_adam, init_mlp, mlp_backward, mlp_forward


@dataclass(frozen=True)
class GaussianBlob:
    center: np.ndarray
    radius: float
    peak: float
    color: np.ndarray  # rgb in [0, 1]
    tint: float = 0.0  # 0 = view-independent, 1 = fully direction-colored

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))
        object.__setattr__(self, "color", np.asarray(self.color, dtype=np.float64))
        if self.radius <= 0 or self.peak < 0 or not 0 <= self.tint <= 1:
            raise InputError("blob requires radius > 0, peak >= 0, tint in [0, 1]")
        if np.any(self.color < 0) or np.any(self.color > 1):
            raise InputError("blob color must lie in [0, 1]^3")


@dataclass(frozen=True)
class AnalyticScene:
    blobs: tuple

    def __post_init__(self):
        object.__setattr__(self, "blobs", tuple(self.blobs))
        if not self.blobs:
            raise InputError("scene needs at least one blob")


def _blob_arrays(scene: AnalyticScene):
    centers = np.stack([b.center for b in scene.blobs])  # (nb, 3)
    inv_r2 = np.array([1.0 / b.radius**2 for b in scene.blobs])
    peaks = np.array([b.peak for b in scene.blobs])
    base = np.stack([(1.0 - b.tint) * b.color for b in scene.blobs])  # (nb, 3)
    tints = np.array([b.tint for b in scene.blobs])
    return centers, inv_r2, peaks, base, tints


def analytic_query(scene: AnalyticScene, points: np.ndarray, dirs: np.ndarray):
    """sigma(x) = sum_b peak_b * exp(-|x-c_b|^2 / r_b^2); color is the
    sigma-weighted mix of per-blob colors, each blended toward the
    direction color (d+1)/2 by its tint strength."""
    points = np.asarray(points)
    dirs = np.asarray(dirs, dtype=points.dtype)
    centers, inv_r2, peaks, base, tints = _blob_arrays(scene)
    if points.dtype != np.float64:
        dt = points.dtype
        centers, inv_r2, peaks, base, tints = (
            centers.astype(dt), inv_r2.astype(dt), peaks.astype(dt), base.astype(dt), tints.astype(dt)
        )
    # |p - c|^2 expanded so the cross term is one BLAS call
    d2 = (
        np.sum(points**2, axis=1)[:, None]
        - 2.0 * (points @ centers.T)
        + np.sum(centers**2, axis=1)[None, :]
    )
    g = np.exp(d2 * -inv_r2) * peaks  # (n, nb) per-blob density
    sigma = g.sum(axis=1)
    dir_color = 0.5 * (dirs + 1.0)
    rgb_acc = g @ base + (g @ tints)[:, None] * dir_color
    rgb = rgb_acc / (sigma[:, None] + 1e-12)
    return sigma, rgb


@dataclass
class MicroNerf:
    """Point-query field: MLP on [PE(x) | SH(d)] -> (sigma, rgb)."""

    params: MLPParams
    enc: EncodingConfig  # pe_frequencies / sh_degree / scene_radius are used

    def encode_points(self, points: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        dtype = self.params.dtype
        pe = positional_encode_batch(
            np.asarray(points, dtype=dtype) / dtype.type(self.enc.scene_radius),
            self.enc.pe_frequencies,
            self.enc.include_raw,
        )
        sh = sh_encode_batch(np.asarray(dirs, dtype=dtype), self.enc.sh_degree)
        return np.concatenate([pe, sh], axis=1)

    @property
    def input_dim(self) -> int:
        return self.enc.pe_dim(3) + self.enc.sh_dim


def micro_nerf_query(m: MicroNerf, points: np.ndarray, dirs: np.ndarray, record: bool = False):
    x = m.encode_points(points, dirs)
    raw, tape = mlp_forward(m.params, x, record=record)
    sigma = softplus(raw[:, 0])
    rgb = sigmoid(raw[:, 1:4])
    if record:
        return sigma, rgb, raw, tape
    return sigma, rgb


def field_query(field, point: np.ndarray, direction: np.ndarray):
    """(sigma, rgb) of one point for either teacher kind."""
    direction = np.asarray(direction, dtype=np.float64)
    if abs(np.linalg.norm(direction) - 1.0) > 1e-6:
        raise InputError("query direction must be unit length")
    p = np.asarray(point, dtype=np.float64)[None, :]
    d = direction[None, :]
    if isinstance(field, AnalyticScene):
        sigma, rgb = analytic_query(field, p, d)
    else:
        sigma, rgb = micro_nerf_query(field, p, d)
    return float(sigma[0]), rgb[0]


# ---------------------------------------------------------------------------
# multi-query ray rendering (s field evaluations per ray)


def teacher_render_rays(
    field,
    origins: np.ndarray,
    dirs: np.ndarray,
    t_near: float,
    t_far: float,
    s: int,
    rng: np.random.Generator | None = None,
    timings: dict | None = None,
):
    """Render rays by querying the field at s points each.

    Returns (rgb (R, 3), sigma samples (R, s)).  Midpoint samples when rng
    is None, stratified otherwise.
    """
    if s < 2:
        raise InputError("need s >= 2 samples per ray")
    origins = np.asarray(origins)
    dirs = np.asarray(dirs, dtype=origins.dtype)
    n = origins.shape[0]
    if rng is None:
        ts = np.broadcast_to(uniform_midpoints(t_near, t_far, s).astype(origins.dtype), (n, s))
    else:
        ts = stratified_matrix(t_near, t_far, s, n, rng).astype(origins.dtype)
    delta = origins.dtype.type((t_far - t_near) / s)

    t0 = time.perf_counter()
    points = (origins[:, None, :] + ts[:, :, None] * dirs[:, None, :]).reshape(n * s, 3)
    dirs_rep = np.repeat(dirs, s, axis=0)
    t1 = time.perf_counter()
    if isinstance(field, AnalyticScene):
        sigma, rgb = analytic_query(field, points, dirs_rep)
        t2 = t_enc_end = time.perf_counter()
    else:
        x = field.encode_points(points, dirs_rep)
        t_enc_end = time.perf_counter()
        raw, _ = mlp_forward(field.params, x)
        raw = raw.astype(origins.dtype)
        sigma = softplus(raw[:, 0])
        rgb = sigmoid(raw[:, 1:4])
        t2 = time.perf_counter()
    sigma = sigma.reshape(n, s)
    rgb = rgb.reshape(n, s, 3)
    out, _, _ = composite(sigma, rgb, delta)
    t3 = time.perf_counter()
    if timings is not None:
        timings["encode"] = timings.get("encode", 0.0) + (t_enc_end - t0)
        timings["network"] = timings.get("network", 0.0) + (t2 - t_enc_end)
        timings["render"] = timings.get("render", 0.0) + (t3 - t2)
    return out, sigma


def teacher_render_ray(field, ray: Ray, s: int, rng: np.random.Generator | None = None):
    rgb, sigma = teacher_render_rays(
        field, ray.origin[None, :], ray.dir[None, :], ray.t_near, ray.t_far, s, rng
    )
    return rgb[0], sigma[0]


# ---------------------------------------------------------------------------
# teacher training (analytic scene -> point-query net)


@dataclass
class MicroNerfTrainConfig:
    iterations: int = 2000
    batch_rays: int = 256
    s_render: int = 64
    lr: float = 5e-4
    hidden: tuple = (64, 64, 64)
    pe_frequencies: int = 6
    sh_degree: int = 4
    seed: int = 0
    log_every: int = 200


def train_micro_nerf(
    scene: AnalyticScene,
    poses,
    cfg: MicroNerfTrainConfig,
    t_near: float,
    t_far: float,
    scene_radius: float,
):
    """Fit the point-query net to the analytic scene by matching rendered rays.

    Rays come from random pixels of the given poses; the loss is the mean
    squared pixel error against the analytic render at the same sample
    points.  Returns (MicroNerf, metrics), metrics one dict per log interval.
    """
    if len(poses) < 1:
        raise InputError("need at least one training pose")
    enc = EncodingConfig(
        pe_frequencies=cfg.pe_frequencies, sh_degree=cfg.sh_degree, n_points=1, scene_radius=scene_radius
    )
    ss = np.random.SeedSequence(cfg.seed)
    rng_init, rng_batch = [np.random.default_rng(s) for s in ss.spawn(2)]
    input_dim = enc.pe_dim(3) + enc.sh_dim
    params = init_mlp([input_dim, *cfg.hidden, 4], rng_init, dtype=np.float32, sigma_dc_bias=-1.0)
    model = MicroNerf(params, enc)
    opt = init_adam(params, lr=cfg.lr)
    delta = np.float32((t_far - t_near) / cfg.s_render)
    metrics = []

    for it in range(cfg.iterations):
        pose = poses[int(rng_batch.integers(0, len(poses)))]
        px = rng_batch.random(cfg.batch_rays) * pose.width
        py = rng_batch.random(cfg.batch_rays) * pose.height
        dirs = pixel_dirs(pose, px, py)
        origins = np.broadcast_to(pose.position, dirs.shape)
        ts = stratified_matrix(t_near, t_far, cfg.s_render, cfg.batch_rays, rng_batch)
        points = (origins[:, None, :] + ts[:, :, None] * dirs[:, None, :]).reshape(-1, 3)
        dirs_rep = np.repeat(dirs, cfg.s_render, axis=0)

        gt_sigma, gt_rgb = analytic_query(scene, points, dirs_rep)
        gt_pix, _, _ = composite(
            gt_sigma.reshape(-1, cfg.s_render), gt_rgb.reshape(-1, cfg.s_render, 3), delta
        )

        sigma, rgb, raw, tape = micro_nerf_query(model, points, dirs_rep, record=True)
        sig_m = sigma.reshape(-1, cfg.s_render)
        rgb_m = rgb.reshape(-1, cfg.s_render, 3)
        pred, _, cache = composite(sig_m, rgb_m, delta)

        err = pred - gt_pix
        loss = float(np.mean(np.sum(err**2, axis=1)))
        if not np.isfinite(loss):
            raise DivergenceError(f"teacher training diverged at iteration {it}")
        d_out = (2.0 / cfg.batch_rays) * err
        d_sigma, d_rgb = composite_backward(cache, d_out)
        d_raw = np.empty_like(raw)
        d_raw[:, 0] = (d_sigma.reshape(-1) * sigmoid(raw[:, 0].astype(np.float64))).astype(raw.dtype)
        d_raw[:, 1:4] = (d_rgb.reshape(-1, 3) * rgb * (1.0 - rgb)).astype(raw.dtype)
        grads, _ = mlp_backward(params, tape, d_raw)
        adam_step(params, grads, opt)

        if it % cfg.log_every == 0 or it == cfg.iterations - 1:
            metrics.append({"iteration": it, "render_loss": loss})
    return model, metrics
