import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from nerdf.cli import main
from nerdf.serve import create_app, parse_pose_message, PoseValidationError


@pytest.fixture(scope="module")
def ckpt_path(tmp_path_factory):
    out = tmp_path_factory.mktemp("serve_ckpt")
    rc = main([
        "distill", "--scene", "sphere", "--out", str(out), "--iterations", "40",
        "--batch", "16", "--hidden-layers", "2", "--hidden-width", "16", "--K", "3", "--seed", "2",
    ])
    assert rc == 0
    return out / "student.ckpt"


@pytest.fixture(scope="module")
def client(ckpt_path):
    app = create_app(str(ckpt_path), max_dim=256)
    with TestClient(app) as c:
        yield c


def pose_msg(request_id, width=32, height=32, x=0.0):
    return {
        "v": 1,
        "request_id": request_id,
        "position": [x, 0.5, -3.9],
        "orientation": [1.0, 0.0, 0.0, 0.0],
        "fov_deg": 53.13,
        "width": width,
        "height": height,
    }


def read_frame(ws):
    data = ws.receive_bytes()
    nl = data.index(b"\n")
    header = json.loads(data[:nl].decode())
    return header, data[nl + 1 :]


class TestValidation:
    def test_bad_quaternion_names_field(self):
        msg = pose_msg(1)
        msg["orientation"] = [0.5, 0.0, 0.0, 0.0]
        with pytest.raises(PoseValidationError) as exc:
            parse_pose_message(json.dumps(msg), 256)
        assert exc.value.field == "orientation"

    def test_oversized_frame_rejected(self):
        with pytest.raises(PoseValidationError) as exc:
            parse_pose_message(json.dumps(pose_msg(1, width=4096)), 256)
        assert exc.value.field == "width"

    def test_unknown_field_rejected(self):
        msg = pose_msg(1)
        msg["zoom"] = 2.0
        with pytest.raises(PoseValidationError):
            parse_pose_message(json.dumps(msg), 256)


class TestHealth:
    def test_health_reports_checkpoint(self, client, ckpt_path):
        from nerdf.checkpoint import checkpoint_sha256

        r = client.get("/health")
        assert r.status_code == 200
        body = r.json()
        assert body["status"] == "ok"
        assert body["checkpoint_sha256"] == checkpoint_sha256(ckpt_path)


class TestRenderSocket:
    def test_request_id_echo_and_dimensions(self, client):
        with client.websocket_connect("/render") as ws:
            ws.send_text(json.dumps(pose_msg(42)))
            header, payload = read_frame(ws)
            assert header["request_id"] == 42
            assert header["encoding"] == "png"
            assert header["render_ms"] > 0
            from PIL import Image as PILImage
            import io

            img = PILImage.open(io.BytesIO(payload))
            assert img.size == (32, 32)

    def test_identical_messages_identical_payloads(self, client):
        frames = []
        with client.websocket_connect("/render") as ws:
            for _ in range(2):
                ws.send_text(json.dumps(pose_msg(7)))
                frames.append(read_frame(ws)[1])
        assert frames[0] == frames[1]

    def test_invalid_message_keeps_session_alive(self, client):
        with client.websocket_connect("/render") as ws:
            bad = pose_msg(1)
            bad["orientation"] = [2.0, 0.0, 0.0, 0.0]
            ws.send_text(json.dumps(bad))
            reply = json.loads(ws.receive_text())
            assert reply["type"] == "error" and reply["field"] == "orientation"
            ws.send_text(json.dumps(pose_msg(2)))
            header, _ = read_frame(ws)
            assert header["request_id"] == 2

    def test_burst_is_latest_wins(self, client):
        # request a slow frame first, then burst three poses while it renders:
        # expect the slow frame, two superseded notices, and one final frame
        with client.websocket_connect("/render") as ws:
            ws.send_text(json.dumps(pose_msg(100, width=128, height=128)))
            time.sleep(0.05)  # let the slow render start
            for rid in (101, 102, 103):
                ws.send_text(json.dumps(pose_msg(rid, x=0.01 * rid)))
            replies = []
            for _ in range(4):
                data = ws.receive()
                if "bytes" in data and data["bytes"] is not None:
                    header = json.loads(data["bytes"][: data["bytes"].index(b"\n")].decode())
                    replies.append(("frame", header["request_id"]))
                else:
                    msg = json.loads(data["text"])
                    replies.append((msg["type"], msg["request_id"]))
        kinds = [r[0] for r in replies]
        assert kinds.count("frame") == 2
        assert kinds.count("superseded") == 2
        assert replies[-1] == ("frame", 103)
        superseded_ids = {r[1] for r in replies if r[0] == "superseded"}
        assert superseded_ids == {101, 102}

    def test_parallel_sessions_share_the_checkpoint(self, client):
        with client.websocket_connect("/render") as ws1, client.websocket_connect("/render") as ws2:
            ws1.send_text(json.dumps(pose_msg(1)))
            ws2.send_text(json.dumps(pose_msg(2)))
            h1, p1 = read_frame(ws1)
            h2, p2 = read_frame(ws2)
        assert h1["request_id"] == 1 and h2["request_id"] == 2
        assert p1 == p2  # same pose, shared read-only weights

    def test_disconnect_mid_render_is_clean(self, client):
        with client.websocket_connect("/render") as ws:
            ws.send_text(json.dumps(pose_msg(9, width=128, height=128)))
            # close immediately; the service must survive
        r = client.get("/health")
        assert r.status_code == 200


class TestByteIdentityWithCli:
    def test_socket_frame_matches_cli_render(self, tmp_path, client, ckpt_path):
        pose_file = tmp_path / "pose.toml"
        pose_file.write_text(
            "position = [0.0, 0.5, -3.9]\nquaternion = [1.0, 0.0, 0.0, 0.0]\n"
            "fov_deg = 53.13\nwidth = 32\nheight = 32\n"
        )
        out_png = tmp_path / "cli.png"
        rc = main(["render", "--ckpt", str(ckpt_path), "--pose", str(pose_file), "--out", str(out_png)])
        assert rc == 0
        with client.websocket_connect("/render") as ws:
            ws.send_text(json.dumps(pose_msg(5)))
            _, payload = read_frame(ws)
        assert payload == out_png.read_bytes()
