"""Command-line entry points wiring the pipeline.

Subcommands: train-teacher, distill, render, bench, eval, serve.  Exit
codes: 0 ok, 2 config error, 3 data/format error, 4 runtime/environment
error.  Every command is reproducible from its echoed config plus seed,
and writes only inside its --out directory.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import report
from .checkpoint import Checkpoint, checkpoint_sha256, load_checkpoint, save_checkpoint
from .config import dump_toml, load_pose_file, resolve_scene
from .distill import DistillConfig, train_student
from .errors import ConfigError, DivergenceError, FormatError, NerdfError
from .field import MicroNerf, MicroNerfTrainConfig, train_micro_nerf

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

EXIT_CONFIG = 2
EXIT_FORMAT = 3
EXIT_RUNTIME = 4


def _load_config_section(path, section: str) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid TOML: {exc}") from exc
    table = doc.get(section, {})
    if not isinstance(table, dict):
        raise ConfigError(f"[{section}] in {path} must be a table")
    return table


def _build_dataclass(cls, file_values: dict, overrides: dict, where: str):
    """defaults < config file < explicit CLI flags, unknown keys rejected."""
    fields = {f.name for f in dataclasses.fields(cls)}
    unknown = set(file_values) - fields
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}")
    merged = dict(file_values)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return cls(**merged)
    except TypeError as exc:
        raise ConfigError(f"bad {where}: {exc}") from exc


def _echo_config(out_dir: str, name: str, doc: dict):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, name), "w") as fh:
        fh.write(dump_toml(doc))


def _threads_from_args(args) -> None:
    n = args.threads or int(os.environ.get("NERDF_THREADS", "0") or 0)
    if n > 0:
        try:
            from threadpoolctl import threadpool_limits

            threadpool_limits(limits=n)
        except ImportError:
            print(f"warning: --threads {n} requested but threadpoolctl is unavailable", file=sys.stderr)


# ---------------------------------------------------------------------------
# subcommands


def cmd_train_teacher(args) -> int:
    scene_cfg = resolve_scene(args.scene)
    file_values = _load_config_section(args.config, "teacher")
    overrides = {"iterations": args.iterations, "seed": args.seed}
    cfg = _build_dataclass(MicroNerfTrainConfig, file_values, overrides, "[teacher] config")
    os.makedirs(args.out, exist_ok=True)
    _echo_config(args.out, "teacher_config.toml", {"scene": scene_cfg.name, "teacher": dataclasses.asdict(cfg)})

    model, metrics = train_micro_nerf(
        scene_cfg.scene, scene_cfg.train_poses, cfg, scene_cfg.t_near, scene_cfg.t_far, scene_cfg.scene_radius
    )
    ckpt_path = os.path.join(args.out, "teacher.ckpt")
    save_checkpoint(ckpt_path, Checkpoint("micronerf", model.params, model.enc, scene_cfg.t_near, scene_cfg.t_far))
    report.write_csv(os.path.join(args.out, "metrics.csv"), metrics)
    _plot_teacher_curve(metrics, os.path.join(args.out, "training_curves.png"))
    print(f"teacher checkpoint: {ckpt_path}")
    print(f"checkpoint sha256: {checkpoint_sha256(ckpt_path)}")
    return 0


def _plot_teacher_curve(metrics, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3))
    ax.plot([m["iteration"] for m in metrics], [m["render_loss"] for m in metrics])
    ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("render loss")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def cmd_distill(args) -> int:
    scene_cfg = resolve_scene(args.scene)
    file_values = _load_config_section(args.config, "distill")
    overrides = {
        "iterations": args.iterations,
        "seed": args.seed,
        "batch_directions": args.batch,
        "k": args.K,
        "hidden_layers": args.hidden_layers,
        "hidden_width": args.hidden_width,
    }
    if args.no_vdc:
        overrides["enable_vdc"] = False
    if args.no_ovs:
        overrides["enable_ovs"] = False
    if args.nelf_baseline:
        overrides["nelf_head"] = True
        overrides["enable_vdc"] = False
    cfg = _build_dataclass(DistillConfig, file_values, overrides, "[distill] config")

    teacher = None
    if args.teacher != "analytic":
        ckpt = load_checkpoint(args.teacher)
        if ckpt.kind != "micronerf":
            raise FormatError(f"--teacher checkpoint must be a point-query teacher, got {ckpt.kind}")
        teacher = MicroNerf(ckpt.params, ckpt.enc)

    os.makedirs(args.out, exist_ok=True)
    _echo_config(args.out, "distill_config.toml", {"scene": scene_cfg.name, "teacher": args.teacher,
                                                   "distill": dataclasses.asdict(cfg)})
    metrics_path = os.path.join(args.out, "metrics.csv")
    ckpt_path = os.path.join(args.out, "student.ckpt")
    rows = []

    def on_metrics(row):
        rows.append(row)
        report.write_csv(metrics_path, rows)

    train_student(scene_cfg, cfg, teacher=teacher, out_path=ckpt_path, on_metrics=on_metrics)
    report.plot_training_curves(rows, os.path.join(args.out, "training_curves.png"))
    if not cfg.nelf_head:
        _plot_probe_distribution(scene_cfg, ckpt_path, teacher, cfg,
                                 os.path.join(args.out, "probe_distribution.png"))
    print(f"student checkpoint: {ckpt_path}")
    print(f"checkpoint sha256: {checkpoint_sha256(ckpt_path)}")
    return 0


def _plot_probe_distribution(scene_cfg, ckpt_path, teacher, cfg, path):
    """Student-vs-teacher opacity profile along one held-out probe ray."""
    from .distribution import RenderConfig, render_rays
    from .field import teacher_render_rays
    from .geometry import pixel_dirs, uniform_midpoints

    ck = load_checkpoint(ckpt_path)
    pose = (scene_cfg.heldout_poses or scene_cfg.train_poses)[0]
    dirs = pixel_dirs(pose, np.asarray([pose.cx]), np.asarray([pose.cy]))
    origins = pose.position[None, :]
    _, student_sigma, _ = render_rays(ck.params, origins, dirs, ck.t_near, ck.t_far, ck.enc,
                                      RenderConfig(cfg.s_render, ck.k))
    field = teacher if teacher is not None else scene_cfg.scene
    _, teacher_sigma = teacher_render_rays(field, origins, dirs, ck.t_near, ck.t_far, cfg.s_render)
    ts = uniform_midpoints(ck.t_near, ck.t_far, cfg.s_render)
    report.plot_ray_distribution(ts, student_sigma[0], teacher_sigma[0], path)


def cmd_render(args) -> int:
    from .evaluate import render_any
    from .image_io import write_image

    ckpt = load_checkpoint(args.ckpt)
    pose = load_pose_file(args.pose)
    img, tb = render_any(ckpt, pose, s_render=args.samples)
    out_dir = os.path.dirname(os.path.abspath(args.out)) or "."
    os.makedirs(out_dir, exist_ok=True)
    write_image(args.out, img)
    print(f"wrote {args.out}")
    if args.breakdown:
        if tb is None:
            print("breakdown: unavailable for this checkpoint kind")
        else:
            row = tb.row()
            print(
                f"breakdown: encode {row['encode_ms']} ms | network {row['network_ms']} ms | "
                f"render {row['render_ms']} ms | total {row['total_ms']} ms"
            )
            with open(args.out + ".breakdown.json", "w") as fh:
                json.dump(row, fh, indent=2)
                fh.write("\n")
    return 0


def cmd_bench(args) -> int:
    from .metrics import benchmark_render
    from .distribution import RenderConfig

    ckpt = load_checkpoint(args.ckpt)
    if ckpt.kind != "nerdf":
        raise FormatError("bench requires a distribution checkpoint")
    pose = load_pose_file(args.pose)
    rc = RenderConfig(s_render=args.samples, k=ckpt.k)
    tb = benchmark_render(ckpt.params, pose, ckpt.enc, rc, ckpt.t_near, ckpt.t_far, reps=args.reps)
    os.makedirs(args.out, exist_ok=True)
    _echo_config(args.out, "bench_config.toml",
                 {"ckpt": args.ckpt, "pose": args.pose, "reps": args.reps, "samples": args.samples})
    report.write_csv(os.path.join(args.out, "breakdown.csv"), [tb.row()])
    report.plot_timing_breakdown(tb, os.path.join(args.out, "breakdown.png"))
    row = tb.row()
    print(
        f"median of {args.reps}: encode {row['encode_ms']} ms | network {row['network_ms']} ms | "
        f"render {row['render_ms']} ms | total {row['total_ms']} ms | {row['fps']} fps"
    )
    return 0


def cmd_eval(args) -> int:
    from .evaluate import heldout_psnrs

    ckpt = load_checkpoint(args.ckpt)
    scene_cfg = resolve_scene(args.scene)
    gt_ckpt = None
    if args.gt != "analytic":
        gt_ckpt = load_checkpoint(args.gt)
    values = heldout_psnrs(ckpt, scene_cfg, gt_ckpt=gt_ckpt, s_render=args.samples)
    os.makedirs(args.out, exist_ok=True)
    _echo_config(args.out, "eval_config.toml",
                 {"ckpt": args.ckpt, "scene": args.scene, "gt": args.gt, "samples": args.samples})
    rows = [{"view": i, "psnr_db": round(v, 4)} for i, v in enumerate(values)]
    mean = float(np.mean(values))
    report.write_csv(os.path.join(args.out, "per_view_psnr.csv"), rows)
    report.plot_psnr_per_view(values, os.path.join(args.out, "psnr_per_view.png"))
    for r in rows:
        print(f"view {r['view']}: {r['psnr_db']:.2f} dB")
    print(f"mean: {mean:.2f} dB")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .serve import create_app

    static = args.static if args.static and os.path.isdir(args.static) else None
    app = create_app(args.ckpt, max_dim=args.max_dim, static_dir=static)
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    except (OSError, SystemExit) as exc:
        raise RuntimeError(f"cannot serve on {args.host}:{args.port}: {exc}") from exc
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nerdf", description=__doc__)
    p.add_argument("--threads", type=int, default=0, help="BLAS thread cap (default: NERDF_THREADS or hardware)")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train-teacher", help="fit the point-query teacher to an analytic scene")
    t.add_argument("--scene", required=True, help="builtin scene name or scene config path")
    t.add_argument("--out", required=True)
    t.add_argument("--config", default=None, help="TOML file with a [teacher] table")
    t.add_argument("--iterations", type=int, default=None)
    t.add_argument("--seed", type=int, default=None)
    t.set_defaults(func=cmd_train_teacher)

    d = sub.add_parser("distill", help="distill a teacher into a student network")
    d.add_argument("--scene", required=True)
    d.add_argument("--teacher", default="analytic", help='"analytic" or a teacher checkpoint path')
    d.add_argument("--out", required=True)
    d.add_argument("--config", default=None, help="TOML file with a [distill] table")
    d.add_argument("--iterations", type=int, default=None)
    d.add_argument("--seed", type=int, default=None)
    d.add_argument("--batch", type=int, default=None, help="ray directions per batch")
    d.add_argument("--K", type=int, default=None, help="frequency count of the output distribution")
    d.add_argument("--hidden-layers", type=int, default=None)
    d.add_argument("--hidden-width", type=int, default=None)
    d.add_argument("--no-vdc", action="store_true", help="disable the density-constraint loss")
    d.add_argument("--no-ovs", action="store_true", help="train from fixed poses only")
    d.add_argument("--nelf-baseline", action="store_true", help="direct-rgb head (ablation arm)")
    d.set_defaults(func=cmd_distill)

    r = sub.add_parser("render", help="render a pose from a checkpoint")
    r.add_argument("--ckpt", required=True)
    r.add_argument("--pose", required=True, help="TOML pose file")
    r.add_argument("--out", required=True, help="output image (.png or .ppm)")
    r.add_argument("--samples", type=int, default=64)
    r.add_argument("--breakdown", action="store_true", help="print and save the timing breakdown")
    r.set_defaults(func=cmd_render)

    b = sub.add_parser("bench", help="benchmark rendering of a checkpoint")
    b.add_argument("--ckpt", required=True)
    b.add_argument("--pose", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--reps", type=int, default=10)
    b.add_argument("--samples", type=int, default=64)
    b.set_defaults(func=cmd_bench)

    e = sub.add_parser("eval", help="PSNR over held-out poses")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--scene", required=True)
    e.add_argument("--gt", default="analytic", help='"analytic" or a checkpoint to render ground truth')
    e.add_argument("--out", required=True)
    e.add_argument("--samples", type=int, default=64)
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("serve", help="serve frames over a WebSocket")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--port", type=int, required=True)
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--max-dim", type=int, default=1024)
    s.add_argument("--static", default=None, help="directory with the browser viewer to serve at /")
    s.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _threads_from_args(args)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (DivergenceError, RuntimeError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except NerdfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
