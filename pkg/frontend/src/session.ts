/**
 * Client session state machine.
 *
 * States: "idle" (no outstanding request) and "awaiting-frame" (exactly one
 * request in flight).  Control changes while awaiting are stashed in a
 * one-slot mailbox, so the newest pose is always the next one sent and the
 * request count can never exceed the frame count by more than one.
 * Transport loss flips the session to a visible reconnecting status with
 * exponential backoff; on reconnect the current pose is re-requested.
 */

import type { PoseMessage } from "./orbit.js";
import { parseFrame, parseServerText, poseInvalidField, type FrameHeader } from "./protocol.js";

export interface SocketLike {
  binaryType: string;
  send(data: string): void;
  close(): void;
  onopen: ((...args: any[]) => void) | null;
  onmessage: ((ev: any) => void) | null;
  onclose: ((...args: any[]) => void) | null;
  onerror: ((...args: any[]) => void) | null;
}

export interface SessionOptions {
  connect: () => SocketLike;
  onFrame: (header: FrameHeader, payload: Uint8Array) => void;
  onStatus?: (status: "connecting" | "connected" | "reconnecting") => void;
  onSupersededCount?: (count: number) => void;
  schedule?: (fn: () => void, ms: number) => void;
  maxDim?: number;
}

export class RenderSession {
  state: "idle" | "awaiting-frame" = "idle";
  supersededCount = 0;
  requestsSent = 0;
  framesShown = 0;

  private socket: SocketLike | null = null;
  private open = false;
  private pending: PoseMessage | null = null;
  private inFlight: PoseMessage | null = null;
  private lastPose: PoseMessage | null = null;
  private backoffMs = 250;
  private nextRequestId = 1;
  private closed = false;
  private readonly opts: SessionOptions;

  constructor(opts: SessionOptions) {
    this.opts = opts;
    this.connect();
  }

  private schedule(fn: () => void, ms: number) {
    (this.opts.schedule ?? ((f, m) => setTimeout(f, m)))(fn, ms);
  }

  private connect() {
    if (this.closed) return;
    this.opts.onStatus?.(this.lastPose ? "reconnecting" : "connecting");
    const sock = this.opts.connect();
    sock.binaryType = "arraybuffer";
    this.socket = sock;
    sock.onopen = () => {
      this.open = true;
      this.backoffMs = 250;
      this.opts.onStatus?.("connected");
      // converge to the latest control state after a reconnect
      this.state = "idle";
      this.inFlight = null;
      if (this.lastPose) this.requestPose(this.lastPose);
    };
    sock.onmessage = (ev) => this.handleMessage(ev.data);
    sock.onclose = () => this.handleLoss();
    sock.onerror = () => sock.close();
  }

  private handleLoss() {
    if (this.closed) return;
    this.open = false;
    this.socket = null;
    this.state = "idle";
    this.inFlight = null;
    this.opts.onStatus?.("reconnecting");
    const wait = this.backoffMs;
    this.backoffMs = Math.min(this.backoffMs * 2, 4000);
    this.schedule(() => this.connect(), wait);
  }

  /** Request a render of the given pose; newest request wins while busy. */
  requestPose(pose: PoseMessage): void {
    const bad = poseInvalidField(pose, this.opts.maxDim ?? 1024);
    if (bad !== null) throw new Error(`refusing to send pose with invalid field ${bad}`);
    this.lastPose = pose;
    if (!this.open || this.state === "awaiting-frame") {
      this.pending = pose;
      return;
    }
    this.sendNow(pose);
  }

  private sendNow(pose: PoseMessage) {
    const msg = { ...pose, request_id: this.nextRequestId++ };
    this.inFlight = msg;
    this.state = "awaiting-frame";
    this.requestsSent++;
    this.socket!.send(JSON.stringify(msg));
  }

  private settle() {
    this.state = "idle";
    this.inFlight = null;
    if (this.pending && this.open) {
      const next = this.pending;
      this.pending = null;
      this.sendNow(next);
    }
  }

  private handleMessage(data: unknown) {
    if (typeof data === "string") {
      const msg = parseServerText(data);
      if (msg.type === "superseded") {
        this.supersededCount++;
        this.opts.onSupersededCount?.(this.supersededCount);
        if (this.inFlight && msg.request_id === this.inFlight.request_id) this.settle();
      } else {
        // server rejected the pose; drop it and move on
        if (this.inFlight) this.settle();
      }
      return;
    }
    const { header, payload } = parseFrame(data as ArrayBuffer);
    if (!this.inFlight || header.request_id !== this.inFlight.request_id) {
      return; // stale frame from a previous connection; never display it
    }
    this.framesShown++;
    this.opts.onFrame(header, payload);
    this.settle();
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
  }
}
