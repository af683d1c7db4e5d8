"""Scratch pilot: dense-view wide-disc triplet, rows a/b/c/d at full budget."""
import math
import sys
import time
from dataclasses import replace

import numpy as np

from nerdf.checkpoint import Checkpoint
from nerdf.config import SceneConfig
from nerdf.distill import DistillConfig, train_student
from nerdf.evaluate import heldout_psnrs, probe_rays, density_mse
from nerdf.field import AnalyticScene, GaussianBlob, teacher_render_rays
from nerdf.geometry import look_at_pose
from nerdf.distribution import RenderConfig


def wide_scene(n_train=64):
    w = h = 64
    fx = fy = 48.0
    cx = cy = 32.0
    rng = np.random.default_rng(20240817)
    train = []
    for _ in range(n_train):
        pos = np.array([rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), rng.uniform(-5.0, -3.5)])
        target = np.array([rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6), 0.0])
        train.append(look_at_pose(pos, target, (0, 1, 0), fx, fy, cx, cy, w, h))
    heldout = []
    for i in range(6):  # edge of the disc: sparsest fixed-view coverage
        ang = 2 * math.pi * i / 6
        pos = np.array([1.8 * math.cos(ang), 1.8 * math.sin(ang), -4.4])
        target = np.array([0.15 * math.cos(ang + 1), 0.15 * math.sin(ang + 1), 0.0])
        heldout.append(look_at_pose(pos, target, (0, 1, 0), fx, fy, cx, cy, w, h))
    blobs = [
        GaussianBlob((-0.8, 0.3, 0.2), 0.80, 5.0, (0.95, 0.30, 0.10), 0.6),
        GaussianBlob((0.6, -0.2, -0.4), 0.75, 6.0, (0.10, 0.85, 0.25), 0.7),
        GaussianBlob((0.0, -0.4, 0.8), 0.90, 4.0, (0.15, 0.25, 0.95), 0.5),
    ]
    return SceneConfig("wide", AnalyticScene(tuple(blobs)), w, h, fx, fy, cx, cy, 2.0, 6.0, 6.0,
                       tuple(train), tuple(heldout), 0.25, math.radians(3.0))


iters = int(sys.argv[1]) if len(sys.argv) > 1 else 50_000
sc = wide_scene()
o, d = probe_rays(sc, 400, seed=7)
r64, _ = teacher_render_rays(sc.scene, o, d, 2.0, 6.0, 64)
r4k, _ = teacher_render_rays(sc.scene, o, d, 2.0, 6.0, 4096)
print(f"quadrature max err {np.abs(r64 - r4k).max():.2e}", flush=True)

base = DistillConfig(batch_directions=256, iterations=iters, hidden_layers=4, hidden_width=64,
                     k=12, log_every=10_000, seed=0, enable_ovs=False, enable_vdc=False)
arms = {
    "b_nerdf": base,
    "a_nelf": replace(base, nelf_head=True),
    "c_ovs": replace(base, enable_ovs=True),
    "d_ovs_vdc": replace(base, enable_ovs=True, enable_vdc=True),
}
results = {}
for name, cfg in arms.items():
    t0 = time.perf_counter()
    params, enc, m = train_student(sc, cfg)
    kind = "nelf" if cfg.nelf_head else "nerdf"
    ck = Checkpoint(kind, params, enc, sc.t_near, sc.t_far)
    held = float(np.mean(heldout_psnrs(ck, sc)))
    extra = ""
    if kind == "nerdf":
        mse = density_mse(params, enc, sc, sc.scene, RenderConfig(64, 12), n_rays=256, seed=777)
        extra = f" densityMSE {mse:.3e}"
    results[name] = held
    print(f"{name}: heldout {held:.2f} dB{extra} ({time.perf_counter() - t0:.0f}s)", flush=True)
print(f"C5 gap (b-a): {results['b_nerdf'] - results['a_nelf']:+.2f} dB", flush=True)
print(f"C6 margin (c-b): {results['c_ovs'] - results['b_nerdf']:+.2f} dB", flush=True)
print(f"C7 psnr delta (d-c): {results['d_ovs_vdc'] - results['c_ovs']:+.2f} dB", flush=True)
