"""Scratch pilot: extrapolative heldout design, rows a/b at 50k with traces."""
import math
import sys
import time
from dataclasses import replace

import numpy as np

from nerdf.checkpoint import Checkpoint
from nerdf.config import SceneConfig
from nerdf.distill import DistillConfig, train_student
from nerdf.evaluate import heldout_psnrs, probe_rays
from nerdf.field import AnalyticScene, GaussianBlob, teacher_render_rays
from nerdf.geometry import look_at_pose


def extrap_scene(n_train=32):
    w = h = 64
    fx = fy = 48.0
    cx = cy = 32.0
    rng = np.random.default_rng(55)
    train = []
    for _ in range(n_train):
        pos = np.array([rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-4.2, -3.8)])
        target = np.array([rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4), 0.0])
        train.append(look_at_pose(pos, target, (0, 1, 0), fx, fy, cx, cy, w, h))
    heldout = []
    for i in range(6):  # outside the training disc: wider ring, nearer to the scene
        ang = 2 * math.pi * i / 6
        pos = np.array([1.35 * math.cos(ang), 1.35 * math.sin(ang), -3.5])
        target = np.array([0.25 * math.cos(ang + 2), 0.25 * math.sin(ang + 2), 0.0])
        heldout.append(look_at_pose(pos, target, (0, 1, 0), fx, fy, cx, cy, w, h))
    blobs = [
        GaussianBlob((-0.8, 0.3, 0.2), 0.70, 6.0, (0.95, 0.30, 0.10), 0.5),
        GaussianBlob((0.6, -0.2, -0.4), 0.65, 7.0, (0.10, 0.85, 0.25), 0.6),
        GaussianBlob((0.0, -0.4, 0.8), 0.75, 5.0, (0.15, 0.25, 0.95), 0.4),
    ]
    return SceneConfig("extrap", AnalyticScene(tuple(blobs)), w, h, fx, fy, cx, cy, 2.0, 6.0, 5.0,
                       tuple(train), tuple(heldout), 0.6, math.radians(4.0))


iters = int(sys.argv[1]) if len(sys.argv) > 1 else 50_000
sc = extrap_scene()
o, d = probe_rays(sc, 400, seed=7)
r64, _ = teacher_render_rays(sc.scene, o, d, sc.t_near, sc.t_far, 64)
r4k, _ = teacher_render_rays(sc.scene, o, d, sc.t_near, sc.t_far, 4096)
print(f"quadrature max err {np.abs(r64 - r4k).max():.2e}", flush=True)

base = DistillConfig(batch_directions=256, iterations=iters, hidden_layers=4, hidden_width=64,
                     k=12, log_every=5_000, seed=0, enable_ovs=False, enable_vdc=False)
for name, cfg in (("b_nerdf", base), ("a_nelf", replace(base, nelf_head=True))):
    t0 = time.perf_counter()
    params, enc, m = train_student(sc, cfg)
    ck = Checkpoint("nelf" if cfg.nelf_head else "nerdf", params, enc, sc.t_near, sc.t_far)
    held = float(np.mean(heldout_psnrs(ck, sc)))
    trace = [round(r["psnr_probe"], 1) for r in m]
    print(f"{name}: heldout {held:.2f} dB  trace {trace}  ({time.perf_counter() - t0:.0f}s)", flush=True)
