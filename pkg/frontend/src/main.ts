/**
 * Browser entry point: orbit controls on a canvas, frames from the render
 * service, render time overlay.  Server URL comes from the `?server=`
 * query parameter and defaults to the page host.
 */

import { orbitUpdate, poseFromOrbit, type OrbitState } from "./orbit.js";
import { RenderSession } from "./session.js";

const FRAME_W = 256;
const FRAME_H = 256;

function serverUrl(): string {
  const q = new URLSearchParams(window.location.search).get("server");
  if (q) return q.replace(/^http/, "ws").replace(/\/$/, "") + "/render";
  const proto = window.location.protocol === "https:" ? "wss" : "ws";
  return `${proto}://${window.location.host}/render`;
}

function start() {
  const canvas = document.getElementById("view") as HTMLCanvasElement;
  const overlay = document.getElementById("overlay") as HTMLDivElement;
  const status = document.getElementById("status") as HTMLDivElement;
  canvas.width = FRAME_W;
  canvas.height = FRAME_H;
  const ctx = canvas.getContext("2d")!;

  let orbit: OrbitState = {
    target: [0, 0, 0],
    radius: 4.5,
    azimuth: Math.PI * 1.5,
    elevation: 0.15,
    fovDeg: 53,
  };
  let renderMs = 0;
  let superseded = 0;

  const session = new RenderSession({
    connect: () => new WebSocket(serverUrl()),
    onFrame: (header, payload) => {
      renderMs = header.render_ms;
      const blob = new Blob([payload.slice()], { type: "image/png" });
      createImageBitmap(blob).then((bmp) => {
        ctx.drawImage(bmp, 0, 0, canvas.width, canvas.height);
        overlay.textContent = `render ${renderMs.toFixed(1)} ms | superseded ${superseded}`;
      });
    },
    onStatus: (s) => {
      status.textContent = s === "connected" ? "" : s + "...";
      if (s === "connected") request();
    },
    onSupersededCount: (n) => {
      superseded = n;
    },
  });

  const request = () => session.requestPose(poseFromOrbit(orbit, 0, FRAME_W, FRAME_H));

  let dragging = false;
  let panning = false;
  let last: [number, number] = [0, 0];
  canvas.addEventListener("pointerdown", (e) => {
    dragging = true;
    panning = e.shiftKey || e.button === 2;
    last = [e.clientX, e.clientY];
    canvas.setPointerCapture(e.pointerId);
  });
  canvas.addEventListener("pointermove", (e) => {
    if (!dragging) return;
    const dx = e.clientX - last[0];
    const dy = e.clientY - last[1];
    last = [e.clientX, e.clientY];
    orbit = orbitUpdate(orbit, panning ? { kind: "pan", dx, dy } : { kind: "drag", dx, dy });
    request();
  });
  canvas.addEventListener("pointerup", () => {
    dragging = false;
  });
  canvas.addEventListener("wheel", (e) => {
    e.preventDefault();
    orbit = orbitUpdate(orbit, { kind: "scroll", dz: e.deltaY });
    request();
  });
  canvas.addEventListener("contextmenu", (e) => e.preventDefault());
}

start();
