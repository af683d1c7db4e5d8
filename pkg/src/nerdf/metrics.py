"""Quality metrics and the timing/benchmark harness.

PSNR is computed on pre-quantization [0, 1] values; identical images are
capped at a 99 dB sentinel.  Benchmarks use monotonic clocks only, exclude
one warm-up render, and report per-component medians in the order
encode / network / render / total.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass

import numpy as np

from .errors import InputError, StructuralError
from . import nn

PSNR_SENTINEL = 99.0


@dataclass(frozen=True)
class Image:
    width: int
    height: int
    rgb: np.ndarray  # (height, width, 3) in [0, 1], row-major

    def __post_init__(self):
        a = np.asarray(self.rgb, dtype=np.float64)
        if a.shape != (self.height, self.width, 3):
            raise StructuralError(f"rgb shape {a.shape} != ({self.height}, {self.width}, 3)")
        if np.any(a < 0) or np.any(a > 1) or not np.all(np.isfinite(a)):
            raise InputError("image values must lie in [0, 1]")
        object.__setattr__(self, "rgb", a)


@dataclass(frozen=True)
class TimingBreakdown:
    encode_ms: float
    network_ms: float
    render_ms: float
    total_ms: float
    rays: int

    @property
    def fps(self) -> float:
        return 1000.0 / self.total_ms

    def row(self) -> dict:
        return {
            "encode_ms": round(self.encode_ms, 3),
            "network_ms": round(self.network_ms, 3),
            "render_ms": round(self.render_ms, 3),
            "total_ms": round(self.total_ms, 3),
            "rays": self.rays,
            "fps": round(self.fps, 3),
        }


def psnr(a: Image, b: Image) -> float:
    """10 * log10(1 / MSE) over [0, 1] images, capped at the 99 dB sentinel."""
    if a.width != b.width or a.height != b.height:
        raise StructuralError("image dimensions differ")
    mse = float(np.mean((a.rgb - b.rgb) ** 2))
    if mse <= 0:
        return PSNR_SENTINEL
    return min(PSNR_SENTINEL, float(10.0 * np.log10(1.0 / mse)))


def _median_breakdown(samples: list, rays: int) -> TimingBreakdown:
    return TimingBreakdown(
        encode_ms=statistics.median(s["encode"] for s in samples) * 1e3,
        network_ms=statistics.median(s["network"] for s in samples) * 1e3,
        render_ms=statistics.median(s["render"] for s in samples) * 1e3,
        total_ms=statistics.median(s["total"] for s in samples) * 1e3,
        rays=rays,
    )


def benchmark_render(params, pose, enc, rc, t_near, t_far, reps: int = 10) -> TimingBreakdown:
    """Median timing of the single-forwarding render over `reps` runs.

    Asserts the forward-call contract on every rep: exactly one network
    evaluation per pixel.
    """
    from .distribution import render_rays
    from .geometry import pixel_grid_rays

    if reps < 3:
        raise InputError("need reps >= 3")
    origins, dirs = pixel_grid_rays(pose, t_near, t_far)
    n_rays = origins.shape[0]
    samples = []
    for rep in range(reps + 1):  # rep 0 is the discarded warm-up
        timings: dict = {}
        nn.FORWARD_COUNTER.reset()
        t0 = time.perf_counter()
        render_rays(params, origins, dirs, t_near, t_far, enc, rc, rng=None, timings=timings)
        timings["total"] = time.perf_counter() - t0
        if nn.FORWARD_COUNTER.rows != n_rays:
            raise StructuralError(
                f"expected {n_rays} network evaluations (one per pixel), counted {nn.FORWARD_COUNTER.rows}"
            )
        if rep > 0:
            samples.append(timings)
    return _median_breakdown(samples, n_rays)


def benchmark_teacher_render(field, pose, s: int, t_near: float, t_far: float, reps: int = 10) -> TimingBreakdown:
    """Median timing of the s-queries-per-ray teacher render path."""
    from .field import teacher_render_rays
    from .geometry import pixel_grid_rays

    if reps < 3:
        raise InputError("need reps >= 3")
    origins, dirs = pixel_grid_rays(pose, t_near, t_far)
    samples = []
    for rep in range(reps + 1):
        timings: dict = {}
        t0 = time.perf_counter()
        teacher_render_rays(field, origins, dirs, t_near, t_far, s, rng=None, timings=timings)
        timings["total"] = time.perf_counter() - t0
        if rep > 0:
            samples.append(timings)
    return _median_breakdown(samples, origins.shape[0])
