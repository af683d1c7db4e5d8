"""Scratch pilot: narrow-width arms on the shipped triplet, rows a/b at 50k."""
import sys
import time
from dataclasses import replace

import numpy as np

from nerdf.checkpoint import Checkpoint
from nerdf.config import builtin_scene
from nerdf.distill import DistillConfig, train_student
from nerdf.evaluate import heldout_psnrs

iters = int(sys.argv[1]) if len(sys.argv) > 1 else 50_000
width = int(sys.argv[2]) if len(sys.argv) > 2 else 32
seed = int(sys.argv[3]) if len(sys.argv) > 3 else 0
sc = builtin_scene("triplet")
base = DistillConfig(batch_directions=256, iterations=iters, hidden_layers=4, hidden_width=width,
                     k=12, log_every=5_000, seed=seed, enable_ovs=False, enable_vdc=False)
for name, cfg in (("b_nerdf", base), ("a_nelf", replace(base, nelf_head=True))):
    t0 = time.perf_counter()
    params, enc, m = train_student(sc, cfg)
    ck = Checkpoint("nelf" if cfg.nelf_head else "nerdf", params, enc, sc.t_near, sc.t_far)
    held = float(np.mean(heldout_psnrs(ck, sc)))
    trace = [round(r["psnr_probe"], 1) for r in m]
    print(f"w{width} seed{seed} {name}: heldout {held:.2f} dB  trace {trace}  ({time.perf_counter() - t0:.0f}s)",
          flush=True)
