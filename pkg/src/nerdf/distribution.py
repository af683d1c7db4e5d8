"""Fourier-parameterized per-ray radiance distributions and volume rendering.

A ray maps, through one network forwarding, to 8K coefficients: 2K for the
opacity function and 2K per color channel.  Opacity/color curves along the
ray are reconstructed from an interleaved cosine/sine basis over the ray
segment (period = t_far - t_near, ray-local t shifted to [0, T]), squashed
through softplus / sigmoid, and integrated by the standard alpha-compositing
discretization.  The same compositing kernel is used for the point-query
teacher so both paths agree bit for bit on identical inputs.

Channel layout of the network output, fixed and versioned in checkpoints:
[w_sigma (2K) | w_r (2K) | w_g (2K) | w_b (2K)].
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.special import expit as sigmoid

from .encoding import EncodingConfig, encode_rays
from .errors import InputError, StructuralError
from .geometry import CameraPose, Ray, pixel_grid_rays, uniform_midpoints
from .nn import MLPParams, mlp_forward


def softplus(x):
    # stable log(1 + e^x) = max(x, 0) + log1p(e^{-|x|}); faster than logaddexp
    x = np.asarray(x)
    return np.maximum(x, 0) + np.log1p(np.exp(-np.abs(x)))


@dataclass(frozen=True)
class FourierCoeffs:
    """Frequency weights of one ray's opacity and color distributions."""

    w_sigma: np.ndarray  # (2K,)
    w_color: np.ndarray  # (3, 2K)
    t_period: float

    def __post_init__(self):
        w_s = np.asarray(self.w_sigma, dtype=np.float64)
        w_c = np.asarray(self.w_color, dtype=np.float64)
        if w_s.ndim != 1 or w_s.shape[0] % 2 != 0:
            raise InputError("w_sigma must be a 2K vector")
        if w_c.shape != (3, w_s.shape[0]):
            raise InputError("w_color must be (3, 2K)")
        if not (np.all(np.isfinite(w_s)) and np.all(np.isfinite(w_c))):
            raise InputError("coefficients must be finite")
        if self.t_period <= 0:
            raise InputError("t_period must be positive")
        object.__setattr__(self, "w_sigma", w_s)
        object.__setattr__(self, "w_color", w_c)

    @property
    def k(self) -> int:
        return self.w_sigma.shape[0] // 2


@dataclass(frozen=True)
class RenderConfig:
    s_render: int = 64
    k: int = 12

    def __post_init__(self):
        if self.s_render < 2 or self.k < 1:
            raise InputError("require s_render >= 2 and k >= 1")

    @property
    def output_dim(self) -> int:
        return 8 * self.k


def basis_matrix(ts: np.ndarray, k: int, t_period: float) -> np.ndarray:
    """(len(ts), 2K) trig basis: entry i is cos(i*pi*t/T) for even i,
    sin((i+1)*pi*t/T) for odd i."""
    ts = np.asarray(ts)
    i = np.arange(2 * k)
    mult = np.where(i % 2 == 0, i, i + 1).astype(ts.dtype)  # both branches use frequency-index*pi/T
    ang = ts[:, None] * (mult * np.pi / t_period)
    out = np.empty((ts.shape[0], 2 * k), dtype=ts.dtype)
    out[:, 0::2] = np.cos(ang[:, 0::2])
    out[:, 1::2] = np.sin(ang[:, 1::2])
    return out


def basis_eval(t: float, k: int, t_period: float) -> np.ndarray:
    return basis_matrix(np.asarray([t], dtype=np.float64), k, t_period)[0]


def decode_distribution(coeffs: FourierCoeffs, t_samples: np.ndarray):
    """Reconstruct (sigma, rgb) at ray-local t samples in [0, T]."""
    b = basis_matrix(np.asarray(t_samples, dtype=np.float64), coeffs.k, coeffs.t_period)
    raw_sigma = b @ coeffs.w_sigma
    raw_color = b @ coeffs.w_color.T  # (s, 3)
    return softplus(raw_sigma), sigmoid(raw_color)


def split_output(raw: np.ndarray, k: int):
    """Network output (n, 8K) -> (w_sigma (n, 2K), w_color (n, 3, 2K))."""
    if raw.shape[-1] != 8 * k:
        raise StructuralError(f"output dim {raw.shape[-1]} != 8K = {8 * k}")
    return raw[:, : 2 * k], raw[:, 2 * k :].reshape(raw.shape[0], 3, 2 * k)


# ---------------------------------------------------------------------------
# alpha compositing (the discrete volume rendering kernel)


def composite(sigma: np.ndarray, rgb: np.ndarray, deltas):
    """Batched alpha compositing.

    sigma (R, s), rgb (R, s, 3), deltas scalar or (R, s) ->
    (pixel rgb (R, 3), weights (R, s), cache for the backward pass).
    """
    if sigma.shape != rgb.shape[:2]:
        raise StructuralError(f"sigma {sigma.shape} vs rgb {rgb.shape} length mismatch")
    e = np.exp(-sigma * deltas)
    alpha = 1.0 - e
    f = e + 1e-10
    trans = np.cumprod(f, axis=1)
    trans = np.concatenate([np.ones_like(trans[:, :1]), trans[:, :-1]], axis=1)  # exclusive
    weights = trans * alpha
    out = np.einsum("rs,rsc->rc", weights, rgb)
    cache = {"e": e, "alpha": alpha, "f": f, "trans": trans, "weights": weights, "rgb": rgb, "deltas": deltas}
    return out, weights, cache


def composite_backward(cache, d_out: np.ndarray):
    """Gradients of the composited pixel rgb w.r.t. per-sample sigma and color.

    d_out (R, 3) -> (d_sigma (R, s), d_rgb (R, s, 3)).
    """
    w, rgb, trans, f = cache["weights"], cache["rgb"], cache["trans"], cache["f"]
    d_rgb = w[:, :, None] * d_out[:, None, :]
    dw = np.einsum("rc,rsc->rs", d_out, rgb)
    g = dw * w
    suffix = np.flip(np.cumsum(np.flip(g, axis=1), axis=1), axis=1) - g  # sum over j > i
    d_alpha = dw * trans - suffix / f
    d_sigma = d_alpha * cache["deltas"] * cache["e"]
    return d_sigma, d_rgb


def volume_render(sigma: np.ndarray, rgb: np.ndarray, deltas: np.ndarray):
    """Single-ray compositing: sigma (s,), rgb (s, 3), deltas (s,) -> (rgb, weights)."""
    sigma = np.asarray(sigma, dtype=np.float64)
    rgb = np.asarray(rgb, dtype=np.float64)
    deltas = np.asarray(deltas, dtype=np.float64)
    if not (sigma.shape[0] == rgb.shape[0] == deltas.shape[0]) or sigma.shape[0] < 2:
        raise StructuralError("sigma, rgb, deltas must share a length >= 2")
    if np.any(sigma < 0) or np.any(deltas <= 0):
        raise InputError("require sigma >= 0 and deltas > 0")
    out, weights, _ = composite(sigma[None, :], rgb[None, :, :], deltas[None, :])
    return out[0], weights[0]


# ---------------------------------------------------------------------------
# the render head: network output -> pixel color (+ gradient route back)


def render_head_forward(raw: np.ndarray, bmat: np.ndarray, delta: float):
    """Decode coefficients at fixed samples and composite.

    raw (R, 8K), bmat (s, 2K) basis at the sample points, delta bin width ->
    (pixel rgb (R, 3), sigma (R, s), weights (R, s), cache).
    """
    k = bmat.shape[1] // 2
    r = raw.shape[0]
    s = bmat.shape[0]
    w_sigma, w_color = split_output(raw, k)
    raw_sigma = w_sigma @ bmat.T  # (R, s)
    raw_color = (w_color.reshape(r * 3, 2 * k) @ bmat.T).reshape(r, 3, s).transpose(0, 2, 1)
    sig = softplus(raw_sigma)
    col = sigmoid(raw_color)
    out, weights, ccache = composite(sig, col, delta)
    cache = {"bmat": bmat, "raw_sigma": raw_sigma, "col": col, "ccache": ccache, "k": k}
    return out, sig, weights, cache


def render_head_backward(cache, d_out: np.ndarray, d_sigma_extra: np.ndarray | None = None):
    """Backprop through compositing + activations + basis to (R, 8K) output grads.

    `d_sigma_extra` lets a density-matching loss inject gradients directly on
    the decoded sigma samples.
    """
    d_sigma, d_rgb = composite_backward(cache["ccache"], d_out)
    if d_sigma_extra is not None:
        d_sigma = d_sigma + d_sigma_extra
    d_raw_sigma = d_sigma * sigmoid(cache["raw_sigma"])  # softplus' = sigmoid
    col = cache["col"]
    d_raw_color = d_rgb * (col * (1.0 - col))
    bmat = cache["bmat"]
    r, s = d_raw_sigma.shape
    g_sigma = d_raw_sigma @ bmat  # (R, 2K)
    g_color = np.ascontiguousarray(d_raw_color.transpose(0, 2, 1)).reshape(r * 3, s) @ bmat
    return np.concatenate([g_sigma, g_color.reshape(r, 6 * cache["k"])], axis=1)


# ---------------------------------------------------------------------------
# full rendering paths


def render_rays(
    params: MLPParams,
    origins: np.ndarray,
    dirs: np.ndarray,
    t_near: float,
    t_far: float,
    enc: EncodingConfig,
    rc: RenderConfig,
    rng: np.random.Generator | None = None,
    timings: dict | None = None,
):
    """Render a batch of rays with exactly one network forwarding per ray.

    Returns (rgb (R, 3), sigma samples (R, s), weights (R, s)).
    """
    if params.output_dim != rc.output_dim:
        raise StructuralError(f"network output dim {params.output_dim} != 8K = {rc.output_dim}")
    dtype = params.dtype
    t_period = t_far - t_near
    ts_local = (uniform_midpoints(t_near, t_far, rc.s_render) - t_near).astype(dtype)
    bmat = basis_matrix(ts_local, rc.k, t_period)
    delta = dtype.type(t_period / rc.s_render)

    t0 = time.perf_counter()
    x = encode_rays(origins, dirs, t_near, t_far, enc, rng, dtype=dtype)
    t1 = time.perf_counter()
    raw, _ = mlp_forward(params, x)
    t2 = time.perf_counter()
    out, sig, weights, _ = render_head_forward(raw, bmat, delta)
    t3 = time.perf_counter()
    if timings is not None:
        timings["encode"] = timings.get("encode", 0.0) + (t1 - t0)
        timings["network"] = timings.get("network", 0.0) + (t2 - t1)
        timings["render"] = timings.get("render", 0.0) + (t3 - t2)
    return out, sig, weights


def nerdf_render_ray(
    params: MLPParams,
    ray: Ray,
    enc: EncodingConfig,
    rc: RenderConfig,
    rng: np.random.Generator | None = None,
):
    """Render one ray: encode -> one forward -> decode -> composite."""
    rgb, sig, weights = render_rays(
        params, ray.origin[None, :], ray.dir[None, :], ray.t_near, ray.t_far, enc, rc, rng
    )
    return rgb[0], sig[0], weights[0]


def render_image(
    params: MLPParams,
    pose: CameraPose,
    enc: EncodingConfig,
    rc: RenderConfig,
    t_near: float,
    t_far: float,
):
    """Render the full pixel grid; returns (Image, TimingBreakdown)."""
    from .metrics import Image, TimingBreakdown  # local import avoids a cycle

    t_start = time.perf_counter()
    origins, dirs = pixel_grid_rays(pose, t_near, t_far)
    timings: dict = {}
    rgb, _, _ = render_rays(params, origins, dirs, t_near, t_far, enc, rc, rng=None, timings=timings)
    total = time.perf_counter() - t_start
    img = Image(pose.width, pose.height, np.clip(rgb, 0.0, 1.0).reshape(pose.height, pose.width, 3).astype(np.float64))
    tb = TimingBreakdown(
        encode_ms=timings["encode"] * 1e3,
        network_ms=timings["network"] * 1e3,
        render_ms=timings["render"] * 1e3,
        total_ms=total * 1e3,
        rays=pose.width * pose.height,
    )
    return img, tb
