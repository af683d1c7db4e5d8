"""Scratch pilot: 50k-iteration NeLF-vs-NeRDF gap on candidate triplet layouts."""
import math
import time
from dataclasses import replace

import numpy as np

from nerdf.checkpoint import Checkpoint
from nerdf.config import SceneConfig, _ring_pose
from nerdf.distill import DistillConfig, train_student
from nerdf.evaluate import heldout_psnrs, probe_rays
from nerdf.field import AnalyticScene, GaussianBlob, teacher_render_rays


def make_scene(blobs):
    w = h = 64
    fx = fy = 64.0
    cx = cy = 32.0
    train = tuple(
        [_ring_pose(2 * math.pi * i / 6, 0.15, 4.0, fx, fy, cx, cy, w, h) for i in range(6)]
        + [_ring_pose(2 * math.pi * (i + 0.5) / 6, 0.45, 4.0, fx, fy, cx, cy, w, h) for i in range(6)]
    )
    heldout = tuple(_ring_pose(2 * math.pi * (i + 0.25) / 6, 0.30, 4.0, fx, fy, cx, cy, w, h) for i in range(6))
    return SceneConfig("pilot", AnalyticScene(tuple(blobs)), w, h, fx, fy, cx, cy, 2.0, 6.0, 5.0,
                       train, heldout, 0.25, math.radians(3.0))


blobs = [
    GaussianBlob((-0.55, -0.05, 0.10), 0.28, 12.0, (0.92, 0.18, 0.12), 0.25),
    GaussianBlob((0.55, 0.15, -0.10), 0.26, 12.0, (0.12, 0.85, 0.22), 0.45),
    GaussianBlob((0.05, -0.20, 0.65), 0.30, 10.0, (0.15, 0.25, 0.92), 0.35),
]
sc = make_scene(blobs)
o, d = probe_rays(sc, 500, seed=7)
r64, _ = teacher_render_rays(sc.scene, o, d, 2.0, 6.0, 64)
r4k, _ = teacher_render_rays(sc.scene, o, d, 2.0, 6.0, 4096)
print(f"quadrature max err {np.abs(r64 - r4k).max():.2e}", flush=True)

base = DistillConfig(batch_directions=256, iterations=50_000, hidden_layers=4, hidden_width=64,
                     k=12, log_every=5000, seed=0, enable_ovs=False, enable_vdc=False)
for arm, cfg in [("nerdf", base), ("nelf", replace(base, nelf_head=True))]:
    t0 = time.perf_counter()
    params, enc, metrics = train_student(sc, cfg)
    ck = Checkpoint("nelf" if cfg.nelf_head else "nerdf", params, enc, sc.t_near, sc.t_far)
    ps = heldout_psnrs(ck, sc)
    print(f"{arm}: heldout mean {np.mean(ps):.2f} dB views {[round(p, 1) for p in ps]} "
          f"({time.perf_counter() - t0:.0f}s, probe trace {[round(m['psnr_probe'], 1) for m in metrics]})",
          flush=True)
