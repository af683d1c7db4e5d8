"""Delimited metric outputs and the matplotlib figures rendered next to them."""

from __future__ import annotations

import csv

import numpy as np


def write_csv(path, rows, fieldnames=None):
    rows = list(rows)
    if fieldnames is None:
        fieldnames = list(rows[0].keys()) if rows else []
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_training_curves(metrics, path):
    """Loss curves plus the probe-view PSNR trace from one training run."""
    plt = _pyplot()
    iters = [m["iteration"] for m in metrics]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.2))
    ax1.plot(iters, [m["render_loss"] for m in metrics], label="render")
    if any(m.get("vdc_loss", 0) for m in metrics):
        ax1.plot(iters, [m["vdc_loss"] for m in metrics], label="density constraint")
    ax1.set_yscale("log")
    ax1.set_xlabel("iteration")
    ax1.set_ylabel("loss")
    ax1.legend()
    if "psnr_probe" in (metrics[0] if metrics else {}):
        ax2.plot(iters, [m["psnr_probe"] for m in metrics], color="tab:green")
        ax2.set_xlabel("iteration")
        ax2.set_ylabel("probe PSNR (dB)")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def plot_psnr_per_view(psnrs, path, mean_line=True):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 3))
    ax.bar(range(len(psnrs)), psnrs, color="tab:blue")
    if mean_line and psnrs:
        mean = sum(psnrs) / len(psnrs)
        ax.axhline(mean, color="tab:red", linestyle="--", label=f"mean {mean:.2f} dB")
        ax.legend()
    ax.set_xlabel("held-out view")
    ax.set_ylabel("PSNR (dB)")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def plot_ray_distribution(ts, student_sigma, teacher_sigma, path, normalize=True):
    """Opacity profiles along one ray, student vs teacher.

    Densities are divided by their per-ray maximum for display only, so
    differently scaled fields share one axis.
    """
    plt = _pyplot()
    s = np.asarray(student_sigma, dtype=float)
    t = np.asarray(teacher_sigma, dtype=float)
    if normalize:
        s = s / max(s.max(), 1e-12)
        t = t / max(t.max(), 1e-12)
    fig, ax = plt.subplots(figsize=(6, 3))
    ax.plot(ts, t, color="tab:red", label="teacher")
    ax.plot(ts, s, color="tab:blue", label="student")
    ax.set_xlabel("distance along ray")
    ax.set_ylabel("normalized opacity" if normalize else "opacity")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def plot_timing_breakdown(breakdown, path):
    plt = _pyplot()
    row = breakdown.row()
    labels = ["encode", "network", "render"]
    values = [row["encode_ms"], row["network_ms"], row["render_ms"]]
    fig, ax = plt.subplots(figsize=(5, 3))
    ax.bar(labels, values, color=["tab:gray", "tab:blue", "tab:orange"])
    ax.set_ylabel("median ms per frame")
    ax.set_title(f"total {row['total_ms']:.1f} ms ({row['fps']:.1f} fps)")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
