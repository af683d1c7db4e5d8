"""WebSocket render service: poses in, frames out, latest pose wins.

Protocol (all messages carry a "v": 1 field):

  client -> server, JSON text frame:
      {"v": 1, "request_id": int, "position": [x, y, z],
       "orientation": [w, x, y, z] unit quaternion, "fov_deg": float,
       "width": int, "height": int}

  server -> client:
      frame:      one binary frame: a JSON header line
                  {"v":1,"type":"frame","request_id":..,"encoding":"png",
                   "render_ms":..,"width":..,"height":..}
                  terminated by "\n", followed by the PNG payload.
      superseded: JSON text {"v":1,"type":"superseded","request_id":..}
                  for poses displaced before rendering started.
      error:      JSON text {"v":1,"type":"error","field":..,"message":..}.

Scheduling is latest-wins per session: at most one render is in flight and
at most one pose is pending; a newer pose displaces the pending one, which
is answered with a superseded notice.  Frames are rendered by the same
code path as the render command, so identical poses produce byte-identical
PNG payloads.

GET /health reports service status and the loaded checkpoint hash.
"""

from __future__ import annotations

import asyncio
import json
import time

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .checkpoint import checkpoint_sha256, load_checkpoint
from .config import pose_from_spec
from .errors import ConfigError, NerdfError
from .image_io import png_bytes

_POSE_KEYS = {"v", "request_id", "position", "orientation", "fov_deg", "width", "height"}


class PoseValidationError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(message)
        self.field = field


def parse_pose_message(text: str, max_dim: int) -> dict:
    """Validate a raw pose message; raises PoseValidationError naming the field."""
    try:
        msg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PoseValidationError("message", f"not valid JSON: {exc}") from exc
    if not isinstance(msg, dict):
        raise PoseValidationError("message", "expected a JSON object")
    unknown = set(msg) - _POSE_KEYS
    if unknown:
        raise PoseValidationError("message", f"unknown field(s) {sorted(unknown)}")
    for key in ("request_id", "position", "orientation", "fov_deg", "width", "height"):
        if key not in msg:
            raise PoseValidationError(key, f"missing field {key}")
    pos = msg["position"]
    if not (isinstance(pos, list) and len(pos) == 3):
        raise PoseValidationError("position", "position must be [x, y, z]")
    quat = msg["orientation"]
    if not (isinstance(quat, list) and len(quat) == 4):
        raise PoseValidationError("orientation", "orientation must be a [w, x, y, z] quaternion")
    norm = float(np.linalg.norm(np.asarray(quat, dtype=float)))
    if abs(norm - 1.0) > 1e-3:
        raise PoseValidationError("orientation", f"quaternion norm {norm:.4f} is not 1 within 1e-3")
    fov = float(msg["fov_deg"])
    if not 1.0 < fov < 179.0:
        raise PoseValidationError("fov_deg", "vertical fov must lie in (1, 179) degrees")
    w, h = int(msg["width"]), int(msg["height"])
    if not (0 < w <= max_dim and 0 < h <= max_dim):
        raise PoseValidationError("width" if not 0 < w <= max_dim else "height",
                                  f"frame dimensions must lie in (0, {max_dim}]")
    return msg


def handle_pose(state: dict, msg: dict) -> tuple[bytes, float]:
    """Render one validated pose message; returns (frame bytes, render ms)."""
    from .evaluate import render_any

    pose = pose_from_spec(
        {
            "position": msg["position"],
            "quaternion": msg["orientation"],
            "fov_deg": msg["fov_deg"],
            "width": msg["width"],
            "height": msg["height"],
        },
        where="pose message",
    )
    t0 = time.perf_counter()
    img, tb = render_any(state["ckpt"], pose, s_render=state["s_render"])
    render_ms = tb.total_ms if tb is not None else (time.perf_counter() - t0) * 1e3
    payload = png_bytes(img)
    header = {
        "v": 1,
        "type": "frame",
        "request_id": msg["request_id"],
        "encoding": "png",
        "render_ms": round(render_ms, 3),
        "width": msg["width"],
        "height": msg["height"],
    }
    return json.dumps(header).encode() + b"\n" + payload, render_ms


async def session_loop(ws: WebSocket, state: dict) -> None:
    """Per-connection loop: intake task + latest-wins render loop."""
    pending: dict = {"msg": None}
    wakeup = asyncio.Event()
    send_lock = asyncio.Lock()
    closed = asyncio.Event()

    async def send_json(obj):
        async with send_lock:
            await ws.send_text(json.dumps(obj))

    async def intake():
        try:
            while True:
                text = await ws.receive_text()
                try:
                    msg = parse_pose_message(text, state["max_dim"])
                except PoseValidationError as exc:
                    await send_json({"v": 1, "type": "error", "field": exc.field, "message": str(exc)})
                    continue
                displaced = pending["msg"]
                pending["msg"] = msg
                wakeup.set()
                if displaced is not None:
                    await send_json({"v": 1, "type": "superseded", "request_id": displaced["request_id"]})
        except (WebSocketDisconnect, RuntimeError):
            closed.set()
            wakeup.set()

    intake_task = asyncio.create_task(intake())
    try:
        while not closed.is_set():
            await wakeup.wait()
            wakeup.clear()
            msg = pending["msg"]
            pending["msg"] = None
            if msg is None:
                continue
            try:
                frame, _ = await asyncio.to_thread(handle_pose, state, msg)
            except (NerdfError, ConfigError, ValueError) as exc:
                await send_json({"v": 1, "type": "error", "field": "pose", "message": str(exc)})
                continue
            async with send_lock:
                await ws.send_bytes(frame)
    except (WebSocketDisconnect, RuntimeError):
        pass  # session ends; the service keeps running
    finally:
        intake_task.cancel()
        try:
            await intake_task
        except asyncio.CancelledError:
            pass


def create_app(ckpt_path, max_dim: int = 1024, s_render: int = 64, static_dir=None) -> FastAPI:
    """Build the service around one immutable checkpoint."""
    ckpt = load_checkpoint(ckpt_path)
    state = {
        "ckpt": ckpt,
        "sha256": checkpoint_sha256(ckpt_path),
        "max_dim": max_dim,
        "s_render": s_render,
    }
    app = FastAPI(title="radiance-distribution render service")

    @app.get("/health")
    def health():
        return {"v": 1, "status": "ok", "kind": ckpt.kind, "checkpoint_sha256": state["sha256"]}

    @app.websocket("/render")
    async def render_socket(ws: WebSocket):
        await ws.accept()
        await session_loop(ws, state)

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="viewer")
    return app
