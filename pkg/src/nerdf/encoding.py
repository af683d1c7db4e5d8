"""Compound input ray encoding.

A ray is lifted to a high-dimensional vector by concatenating three parts:
frequency positional encoding of the origin, real spherical harmonics of
the direction, and positional encoding of a handful of points sampled on
the ray path.  Origin and point coordinates are divided by the scene
bounding radius first so the encoded values stay O(1).

Everything here is a pure function of its inputs apart from the explicit
Generator used for on-path point sampling, so batch encoding is safe to
run data-parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .geometry import Ray, stratified_matrix, uniform_midpoints

_UNIT_TOL = 1e-6


@dataclass(frozen=True)
class EncodingConfig:
    pe_frequencies: int = 10
    sh_degree: int = 8
    n_points: int = 16
    include_raw: bool = True
    scene_radius: float = 1.0

    def __post_init__(self):
        if self.pe_frequencies < 1 or self.sh_degree < 1 or self.n_points < 1:
            raise InputError("pe_frequencies, sh_degree and n_points must all be >= 1")
        if self.scene_radius <= 0:
            raise InputError("scene_radius must be positive")

    def pe_dim(self, d: int) -> int:
        per = 2 * self.pe_frequencies + (1 if self.include_raw else 0)
        return d * per

    @property
    def sh_dim(self) -> int:
        return self.sh_degree**2

    @property
    def input_dim(self) -> int:
        return self.pe_dim(3) + self.sh_dim + self.pe_dim(3 * self.n_points)


@dataclass(frozen=True)
class EncodedRay:
    values: np.ndarray
    dim: int


def positional_encode_batch(x: np.ndarray, frequencies: int, include_raw: bool = True) -> np.ndarray:
    """Per component: [raw?, sin(2^k pi x), cos(2^k pi x) for k < frequencies].

    x: (n, d) -> (n, d * (include_raw + 2 * frequencies)), component-major.
    """
    x = np.asarray(x)
    if not np.all(np.isfinite(x)):
        raise InputError("positional encoding input must be finite")
    n, d = x.shape
    per = 2 * frequencies + (1 if include_raw else 0)
    freqs = (np.pi * 2.0 ** np.arange(frequencies)).astype(x.dtype)
    ang = x[:, :, None] * freqs  # (n, d, L)
    out = np.empty((n, d, per), dtype=x.dtype)
    base = 1 if include_raw else 0
    if include_raw:
        out[:, :, 0] = x
    # transcendentals on contiguous arrays, then strided interleave copies
    out[:, :, base + 0 :: 2] = np.sin(ang)
    out[:, :, base + 1 :: 2] = np.cos(ang)
    return out.reshape(n, -1)


def positional_encode(v: np.ndarray, frequencies: int, include_raw: bool = True) -> np.ndarray:
    v = np.atleast_1d(np.asarray(v, dtype=np.float64))
    return positional_encode_batch(v[None, :], frequencies, include_raw)[0]


def _sh_norm(l: int, m: int) -> float:
    return math.sqrt((2 * l + 1) / (4 * math.pi) * math.factorial(l - m) / math.factorial(l + m))


def sh_encode_batch(dirs: np.ndarray, degree: int) -> np.ndarray:
    """Real orthonormal spherical harmonics Y_l^m for l < degree, (l, m)-major.

    Uses the associated-Legendre recurrence with sin^m(theta) folded into the
    azimuthal factors (x + iy)^m, so poles need no special casing.  The
    convention is Condon-Shortley-free: Y_1^{-1,0,1} are positive multiples
    of y, z, x.
    """
    dirs = np.asarray(dirs)
    if dirs.ndim != 2 or dirs.shape[1] != 3:
        raise InputError(f"directions must be (n, 3), got {dirs.shape}")
    norms = np.linalg.norm(dirs, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-5):
        raise InputError("directions must be unit length")
    x, y, z = dirs[:, 0], dirs[:, 1], dirs[:, 2]
    n = dirs.shape[0]
    out = np.empty((n, degree * degree), dtype=dirs.dtype)

    # q[m][l] holds P_l^m(z) / sin^m(theta); a_m + i b_m = (x + i y)^m.
    q_mm = np.ones(n, dtype=dirs.dtype)  # unnormalized P_m^m / sin^m = (2m-1)!!
    a_m = np.ones(n, dtype=dirs.dtype)
    b_m = np.zeros(n, dtype=dirs.dtype)
    for m in range(degree):
        if m > 0:
            a_m, b_m = x * a_m - y * b_m, x * b_m + y * a_m
            q_mm = q_mm * (2 * m - 1)
        q_prev, q_cur = None, q_mm
        for l in range(m, degree):
            if l > m:
                if l == m + 1:
                    q_next = z * (2 * m + 1) * q_mm
                else:
                    q_next = (z * (2 * l - 1) * q_cur - (l + m - 1) * q_prev) / (l - m)
                q_prev, q_cur = q_cur, q_next
            k = _sh_norm(l, m)
            base = l * l + l
            if m == 0:
                out[:, base] = k * q_cur
            else:
                s2k = math.sqrt(2.0) * k
                out[:, base + m] = s2k * q_cur * a_m
                out[:, base - m] = s2k * q_cur * b_m
    return out


def sh_encode(direction: np.ndarray, degree: int) -> np.ndarray:
    d = np.asarray(direction, dtype=np.float64)
    if d.shape != (3,):
        raise InputError(f"direction must be a 3-vector, got {d.shape}")
    if abs(np.linalg.norm(d) - 1.0) > _UNIT_TOL:
        raise InputError("direction must be unit length")
    return sh_encode_batch(d[None, :], degree)[0]


def encode_rays(
    origins: np.ndarray,
    dirs: np.ndarray,
    t_near: float,
    t_far: float,
    cfg: EncodingConfig,
    rng: np.random.Generator | None = None,
    dtype=np.float32,
) -> np.ndarray:
    """Batch encoding [PE(o) | SH(d) | PE(path points)], shape (n, cfg.input_dim).

    Path points come from a fresh stratified draw when `rng` is given
    (training) and from deterministic bin midpoints otherwise (inference).
    """
    scalar = np.dtype(dtype).type
    origins = np.asarray(origins, dtype=dtype)
    dirs = np.asarray(dirs, dtype=dtype)
    n = origins.shape[0]
    if rng is not None:
        ts = stratified_matrix(t_near, t_far, cfg.n_points, n, rng).astype(dtype)
    else:
        ts = np.broadcast_to(uniform_midpoints(t_near, t_far, cfg.n_points).astype(dtype), (n, cfg.n_points))
    points = origins[:, None, :] + ts[:, :, None] * dirs[:, None, :]  # (n, N, 3)
    inv_r = scalar(1.0) / scalar(cfg.scene_radius)
    pe_o = positional_encode_batch(origins * inv_r, cfg.pe_frequencies, cfg.include_raw)
    sh_d = sh_encode_batch(dirs, cfg.sh_degree)
    pe_p = positional_encode_batch(
        (points * inv_r).reshape(n, 3 * cfg.n_points), cfg.pe_frequencies, cfg.include_raw
    )
    return np.concatenate([pe_o, sh_d, pe_p], axis=1)


def encode_ray(ray: Ray, cfg: EncodingConfig, rng: np.random.Generator | None = None) -> EncodedRay:
    values = encode_rays(
        ray.origin[None, :], ray.dir[None, :], ray.t_near, ray.t_far, cfg, rng, dtype=np.float64
    )[0]
    if not np.all(np.isfinite(values)):
        raise InputError("encoded ray contains non-finite values")
    return EncodedRay(values=values, dim=values.shape[0])
