"""Scratch pilot 3: forward-facing frame-filling scenes (LLFF-style geometry)."""
import math
import sys
import time
from dataclasses import replace

import numpy as np

from nerdf.checkpoint import Checkpoint
from nerdf.config import SceneConfig
from nerdf.distill import DistillConfig, train_student
from nerdf.evaluate import heldout_psnrs, probe_rays, analytic_image
from nerdf.field import AnalyticScene, GaussianBlob, teacher_render_rays
from nerdf.geometry import look_at_pose
from nerdf.metrics import psnr


def ff_scene(blobs, fx=48.0, n_train=24, n_heldout=6):
    w = h = 64
    fy = fx
    cx = cy = 32.0
    rng = np.random.default_rng(99)
    poses = []
    for _ in range(n_train + n_heldout):
        pos = np.array([rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-4.2, -3.8)])
        target = np.array([rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), 0.0])
        poses.append(look_at_pose(pos, target, (0, 1, 0), fx, fy, cx, cy, w, h))
    return SceneConfig("ff", AnalyticScene(tuple(blobs)), w, h, fx, fy, cx, cy, 2.0, 6.0, 5.0,
                       tuple(poses[:n_train]), tuple(poses[n_train:]), 0.25, math.radians(3.0))


variants = {
    "ffA": [
        GaussianBlob((-0.8, 0.3, 0.2), 0.8, 5.0, (0.95, 0.30, 0.10), 0.5),
        GaussianBlob((0.6, -0.2, -0.4), 0.75, 6.0, (0.10, 0.85, 0.25), 0.6),
        GaussianBlob((0.0, -0.4, 0.8), 0.9, 4.0, (0.15, 0.25, 0.95), 0.4),
    ],
    "ffB": [
        GaussianBlob((-0.7, 0.3, 0.1), 0.5, 8.0, (0.95, 0.30, 0.10), 0.5),
        GaussianBlob((0.55, -0.15, -0.5), 0.45, 9.0, (0.10, 0.85, 0.25), 0.6),
        GaussianBlob((0.05, -0.35, 0.7), 0.55, 7.0, (0.15, 0.25, 0.95), 0.4),
    ],
}

iters = int(sys.argv[1]) if len(sys.argv) > 1 else 10_000
for name, blobs in variants.items():
    sc = ff_scene(blobs)
    o, d = probe_rays(sc, 400, seed=7)
    r64, _ = teacher_render_rays(sc.scene, o, d, 2.0, 6.0, 64)
    r4k, _ = teacher_render_rays(sc.scene, o, d, 2.0, 6.0, 4096)
    q = np.abs(r64 - r4k).max()
    base = DistillConfig(batch_directions=256, iterations=iters, hidden_layers=4, hidden_width=64,
                         k=12, log_every=iters, seed=0, enable_ovs=False, enable_vdc=False)
    out, tr = {}, {}
    t0 = time.perf_counter()
    for arm, cfg in (("nerdf", base), ("nelf", replace(base, nelf_head=True))):
        params, enc, m = train_student(sc, cfg)
        ck = Checkpoint("nelf" if cfg.nelf_head else "nerdf", params, enc, sc.t_near, sc.t_far)
        out[arm] = float(np.mean(heldout_psnrs(ck, sc)))
        # train-view PSNR to identify the regime (overfit vs underfit)
        from nerdf.evaluate import render_any
        tr_ps = []
        for pose in sc.train_poses[:4]:
            img, _ = render_any(ck, pose)
            tr_ps.append(psnr(img, analytic_image(sc, pose)))
        tr[arm] = float(np.mean(tr_ps))
    print(f"{name}: quad {q:.1e}  nerdf held {out['nerdf']:.2f} train {tr['nerdf']:.2f} | "
          f"nelf held {out['nelf']:.2f} train {tr['nelf']:.2f} | gap {out['nerdf'] - out['nelf']:+.2f} dB "
          f"({time.perf_counter() - t0:.0f}s)", flush=True)
