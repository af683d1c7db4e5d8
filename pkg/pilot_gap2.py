"""Scratch pilot 2: hunt the NeLF-vs-NeRDF regime with 3-blob scenes."""
import math
import sys
import time
from dataclasses import replace

import numpy as np

from nerdf.checkpoint import Checkpoint
from nerdf.config import SceneConfig, _ring_pose
from nerdf.distill import DistillConfig, train_student
from nerdf.evaluate import heldout_psnrs, probe_rays
from nerdf.field import AnalyticScene, GaussianBlob, teacher_render_rays


def make_scene(blobs, n_az=12, rings=(0.15, 0.45), fx=96.0, radius=4.0):
    w = h = 64
    fy = fx
    cx = cy = 32.0
    train = []
    for j, el in enumerate(rings):
        for i in range(n_az):
            train.append(_ring_pose(2 * math.pi * (i + 0.5 * j) / n_az, el, radius, fx, fy, cx, cy, w, h))
    heldout = tuple(
        _ring_pose(2 * math.pi * (i + 0.25) / 6, 0.30, radius, fx, fy, cx, cy, w, h) for i in range(6)
    )
    return SceneConfig("pilot", AnalyticScene(tuple(blobs)), w, h, fx, fy, cx, cy, 2.0, 6.0, 5.0,
                       tuple(train), heldout, 0.25, math.radians(3.0))


variants = {
    # sharp, strongly view-dependent, tightly packed
    "sharpTint": dict(
        blobs=[
            GaussianBlob((-0.45, -0.05, 0.05), 0.25, 12.0, (0.95, 0.15, 0.10), 0.50),
            GaussianBlob((0.45, 0.12, -0.08), 0.24, 12.0, (0.10, 0.90, 0.20), 0.60),
            GaussianBlob((0.02, -0.15, 0.55), 0.27, 10.0, (0.12, 0.22, 0.95), 0.45),
        ],
        fx=96.0,
    ),
    # same but wider field of view
    "sharpTintWide": dict(
        blobs=[
            GaussianBlob((-0.45, -0.05, 0.05), 0.25, 12.0, (0.95, 0.15, 0.10), 0.50),
            GaussianBlob((0.45, 0.12, -0.08), 0.24, 12.0, (0.10, 0.90, 0.20), 0.60),
            GaussianBlob((0.02, -0.15, 0.55), 0.27, 10.0, (0.12, 0.22, 0.95), 0.45),
        ],
        fx=64.0,
    ),
}

iters = int(sys.argv[1]) if len(sys.argv) > 1 else 10_000
hidden = (int(sys.argv[2]), int(sys.argv[3])) if len(sys.argv) > 3 else (4, 64)

for name, spec in variants.items():
    sc = make_scene(spec["blobs"], fx=spec["fx"])
    o, d = probe_rays(sc, 400, seed=7)
    r64, _ = teacher_render_rays(sc.scene, o, d, 2.0, 6.0, 64)
    r4k, _ = teacher_render_rays(sc.scene, o, d, 2.0, 6.0, 4096)
    q = np.abs(r64 - r4k).max()
    base = DistillConfig(batch_directions=256, iterations=iters, hidden_layers=hidden[0],
                         hidden_width=hidden[1], k=12, log_every=iters, seed=0,
                         enable_ovs=False, enable_vdc=False)
    out = {}
    t0 = time.perf_counter()
    for arm, cfg in (("nerdf", base), ("nelf", replace(base, nelf_head=True))):
        params, enc, m = train_student(sc, cfg)
        ck = Checkpoint("nelf" if cfg.nelf_head else "nerdf", params, enc, sc.t_near, sc.t_far)
        out[arm] = float(np.mean(heldout_psnrs(ck, sc)))
    print(f"{name}: quad {q:.1e}  nerdf {out['nerdf']:.2f}  nelf {out['nelf']:.2f}  "
          f"gap {out['nerdf'] - out['nelf']:+.2f} dB  ({time.perf_counter() - t0:.0f}s)",
          flush=True)
