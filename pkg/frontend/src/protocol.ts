/**
 * Wire protocol shared with the render service, plus client-side
 * validation mirroring the server's rules so an invalid message is never
 * sent.
 */

import type { PoseMessage } from "./orbit.js";

export interface FrameHeader {
  v: number;
  type: "frame";
  request_id: number;
  encoding: "png";
  render_ms: number;
  width: number;
  height: number;
}

export interface SupersededNotice {
  v: number;
  type: "superseded";
  request_id: number;
}

export interface ErrorReply {
  v: number;
  type: "error";
  field: string;
  message: string;
}

export type ServerText = SupersededNotice | ErrorReply;

/** Returns the offending field name, or null when the message is valid. */
export function poseInvalidField(msg: PoseMessage, maxDim = 1024): string | null {
  if (!Array.isArray(msg.position) || msg.position.length !== 3 || !msg.position.every(Number.isFinite)) {
    return "position";
  }
  const q = msg.orientation;
  if (!Array.isArray(q) || q.length !== 4 || !q.every(Number.isFinite)) return "orientation";
  const n = Math.hypot(q[0], q[1], q[2], q[3]);
  if (Math.abs(n - 1) > 1e-3) return "orientation";
  if (!(msg.fov_deg > 1 && msg.fov_deg < 179)) return "fov_deg";
  if (!(Number.isInteger(msg.width) && msg.width > 0 && msg.width <= maxDim)) return "width";
  if (!(Number.isInteger(msg.height) && msg.height > 0 && msg.height <= maxDim)) return "height";
  if (!Number.isInteger(msg.request_id)) return "request_id";
  return null;
}

/** Split a binary frame into its JSON header and the PNG payload. */
export function parseFrame(data: ArrayBuffer): { header: FrameHeader; payload: Uint8Array } {
  const bytes = new Uint8Array(data);
  let nl = -1;
  for (let i = 0; i < bytes.length; i++) {
    if (bytes[i] === 0x0a) {
      nl = i;
      break;
    }
  }
  if (nl < 0) throw new Error("frame is missing its header line");
  const header = JSON.parse(new TextDecoder().decode(bytes.subarray(0, nl))) as FrameHeader;
  if (header.type !== "frame") throw new Error(`unexpected binary message type ${header.type}`);
  return { header, payload: bytes.subarray(nl + 1) };
}

export function parseServerText(text: string): ServerText {
  const msg = JSON.parse(text) as ServerText;
  if (msg.type !== "superseded" && msg.type !== "error") {
    throw new Error(`unexpected text message type ${(msg as { type?: string }).type}`);
  }
  return msg;
}
