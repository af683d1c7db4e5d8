"""Scratch pilot: full-budget row-a/row-b comparison on the shipped triplet, 3 seeds."""
import time
from dataclasses import replace

import numpy as np

from nerdf.checkpoint import Checkpoint
from nerdf.config import builtin_scene
from nerdf.distill import DistillConfig, train_student
from nerdf.evaluate import heldout_psnrs

sc = builtin_scene("triplet")
for seed in (0, 1, 2):
    base = DistillConfig(batch_directions=256, iterations=50_000, hidden_layers=4, hidden_width=64,
                         k=12, log_every=10_000, seed=seed, enable_ovs=False, enable_vdc=False)
    row = {}
    t0 = time.perf_counter()
    for arm, cfg in (("nerdf", base), ("nelf", replace(base, nelf_head=True))):
        params, enc, _ = train_student(sc, cfg)
        ck = Checkpoint("nelf" if cfg.nelf_head else "nerdf", params, enc, sc.t_near, sc.t_far)
        row[arm] = float(np.mean(heldout_psnrs(ck, sc)))
    print(f"seed {seed}: nerdf {row['nerdf']:.2f}  nelf {row['nelf']:.2f}  "
          f"gap {row['nerdf'] - row['nelf']:+.2f} dB  ({time.perf_counter() - t0:.0f}s)", flush=True)
