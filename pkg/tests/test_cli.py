import os
import subprocess
import sys

import numpy as np
import pytest

from nerdf.checkpoint import checkpoint_sha256
from nerdf.cli import main

POSE_TOML = (
    "position = [0.0, 0.5, -3.9]\nlook_at = [0.0, 0.0, 0.0]\nfov_deg = 53.13\nwidth = 24\nheight = 24\n"
)


@pytest.fixture(scope="module")
def tiny_student(tmp_path_factory):
    out = tmp_path_factory.mktemp("student")
    rc = main([
        "distill", "--scene", "sphere", "--out", str(out), "--iterations", "60",
        "--batch", "32", "--hidden-layers", "2", "--hidden-width", "16", "--K", "3", "--seed", "5",
    ])
    assert rc == 0
    return out / "student.ckpt"


class TestExitCodes:
    def test_missing_scene_file_exits_2_and_names_path(self, tmp_path, capsys):
        rc = main(["train-teacher", "--scene", str(tmp_path / "nope.toml"), "--out", str(tmp_path / "o")])
        assert rc == 2
        assert "nope.toml" in capsys.readouterr().err

    def test_corrupted_checkpoint_magic_exits_3(self, tmp_path, tiny_student, capsys):
        bad = tmp_path / "bad.ckpt"
        blob = bytearray(tiny_student.read_bytes())
        blob[:4] = b"JUNK"
        bad.write_bytes(bytes(blob))
        pose = tmp_path / "pose.toml"
        pose.write_text(POSE_TOML)
        rc = main(["render", "--ckpt", str(bad), "--pose", str(pose), "--out", str(tmp_path / "img.png")])
        assert rc == 3

    def test_unknown_config_key_exits_2(self, tmp_path):
        cfg = tmp_path / "cfg.toml"
        cfg.write_text("[distill]\niterationz = 10\n")
        rc = main(["distill", "--scene", "sphere", "--out", str(tmp_path / "o"), "--config", str(cfg)])
        assert rc == 2

    def test_occupied_port_exits_4(self, tmp_path, tiny_student):
        import socket

        sock = socket.socket()
        sock.bind(("127.0.0.1", 0))
        port = sock.getsockname()[1]
        try:
            proc = subprocess.run(
                [sys.executable, "-m", "nerdf.cli", "serve", "--ckpt", str(tiny_student), "--port", str(port)],
                capture_output=True, timeout=60,
            )
            assert proc.returncode == 4
        finally:
            sock.close()


class TestDeterminism:
    def test_teacher_training_hash_stable(self, tmp_path):
        hashes = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            rc = main(["train-teacher", "--scene", "sphere", "--out", str(out),
                       "--iterations", "40", "--seed", "7"])
            assert rc == 0
            hashes.append(checkpoint_sha256(out / "teacher.ckpt"))
        assert hashes[0] == hashes[1]

    def test_distill_hash_stable(self, tmp_path):
        hashes = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            rc = main(["distill", "--scene", "sphere", "--out", str(out), "--iterations", "30",
                       "--batch", "16", "--hidden-layers", "2", "--hidden-width", "16",
                       "--K", "2", "--seed", "11"])
            assert rc == 0
            hashes.append(checkpoint_sha256(out / "student.ckpt"))
        assert hashes[0] == hashes[1]

    def test_render_bytes_stable(self, tmp_path, tiny_student):
        pose = tmp_path / "pose.toml"
        pose.write_text(POSE_TOML)
        outs = []
        for name in ("a.ppm", "b.ppm"):
            rc = main(["render", "--ckpt", str(tiny_student), "--pose", str(pose),
                       "--out", str(tmp_path / name)])
            assert rc == 0
            outs.append((tmp_path / name).read_bytes())
        assert outs[0] == outs[1]


class TestOutputs:
    def test_distill_writes_metrics_and_figure(self, tiny_student):
        out = tiny_student.parent
        assert (out / "metrics.csv").exists()
        assert (out / "training_curves.png").exists()
        assert (out / "distill_config.toml").exists()

    def test_nelf_baseline_flag_produces_3_channel_head(self, tmp_path):
        out = tmp_path / "nelf"
        rc = main(["distill", "--scene", "sphere", "--out", str(out), "--iterations", "20",
                   "--batch", "16", "--hidden-layers", "2", "--hidden-width", "16",
                   "--nelf-baseline", "--seed", "0"])
        assert rc == 0
        from nerdf.checkpoint import load_checkpoint

        ck = load_checkpoint(out / "student.ckpt")
        assert ck.kind == "nelf" and ck.params.output_dim == 3

    @pytest.mark.parametrize("k", [4, 8, 12, 16, 24])
    def test_k_sweep_values_accepted(self, tmp_path, k):
        out = tmp_path / f"k{k}"
        rc = main(["distill", "--scene", "sphere", "--out", str(out), "--iterations", "2",
                   "--batch", "4", "--hidden-layers", "1", "--hidden-width", "8",
                   "--K", str(k), "--seed", "0"])
        assert rc == 0
        from nerdf.checkpoint import load_checkpoint

        assert load_checkpoint(out / "student.ckpt").k == k

    def test_render_breakdown_prints_four_fields(self, tmp_path, tiny_student, capsys):
        pose = tmp_path / "pose.toml"
        pose.write_text(POSE_TOML)
        rc = main(["render", "--ckpt", str(tiny_student), "--pose", str(pose),
                   "--out", str(tmp_path / "img.png"), "--breakdown"])
        assert rc == 0
        out = capsys.readouterr().out
        for field in ("encode", "network", "render", "total"):
            assert field in out

    def test_eval_reports_per_view_and_mean(self, tmp_path, tiny_student, capsys):
        out = tmp_path / "eval"
        rc = main(["eval", "--ckpt", str(tiny_student), "--scene", "sphere", "--out", str(out)])
        assert rc == 0
        text = capsys.readouterr().out
        assert "view 0:" in text and "mean:" in text
        assert (out / "per_view_psnr.csv").exists()
        assert (out / "psnr_per_view.png").exists()

    def test_eval_self_comparison_hits_sentinel(self, tmp_path, capsys):
        teacher_out = tmp_path / "teacher"
        rc = main(["train-teacher", "--scene", "sphere", "--out", str(teacher_out),
                   "--iterations", "20", "--seed", "1"])
        assert rc == 0
        ckpt = str(teacher_out / "teacher.ckpt")
        rc = main(["eval", "--ckpt", ckpt, "--scene", "sphere", "--gt", ckpt,
                   "--out", str(tmp_path / "selfeval")])
        assert rc == 0
        lines = [l for l in capsys.readouterr().out.splitlines() if l.startswith("view")]
        assert lines and all("99.0" in l for l in lines)

    def test_bench_writes_summary_row(self, tmp_path, tiny_student, capsys):
        pose = tmp_path / "pose.toml"
        pose.write_text(POSE_TOML)
        out = tmp_path / "bench"
        rc = main(["bench", "--ckpt", str(tiny_student), "--pose", str(pose), "--out", str(out),
                   "--reps", "3"])
        assert rc == 0
        assert (out / "breakdown.csv").exists()
        assert (out / "breakdown.png").exists()
        assert "fps" in capsys.readouterr().out
