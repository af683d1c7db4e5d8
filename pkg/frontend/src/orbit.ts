/**
 * Orbit camera state and its mapping to render-service pose messages.
 *
 * The camera sits on a sphere around `target`: azimuth 0, elevation 0
 * places it on the +x axis of the target, looking back at it with +y as
 * the world up direction.  Conventions mirror the server: camera-space +z
 * is the viewing direction, +x right, +y down in the image.
 */

export interface OrbitState {
  target: [number, number, number];
  radius: number;
  azimuth: number; // radians
  elevation: number; // radians, clamped to (-89deg, 89deg)
  fovDeg: number;
}

export interface OrbitLimits {
  minRadius: number;
  maxRadius: number;
}

export type OrbitInput =
  | { kind: "drag"; dx: number; dy: number }
  | { kind: "scroll"; dz: number }
  | { kind: "pan"; dx: number; dy: number };

const ELEVATION_LIMIT = (89 * Math.PI) / 180;
const DRAG_GAIN = 0.008;
const SCROLL_GAIN = 0.001;
const PAN_GAIN = 0.002;

const clamp = (x: number, lo: number, hi: number) => Math.min(hi, Math.max(lo, x));

type Vec3 = [number, number, number];

const sub = (a: Vec3, b: Vec3): Vec3 => [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
const add = (a: Vec3, b: Vec3): Vec3 => [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
const scale = (a: Vec3, s: number): Vec3 => [a[0] * s, a[1] * s, a[2] * s];
const cross = (a: Vec3, b: Vec3): Vec3 => [
  a[1] * b[2] - a[2] * b[1],
  a[2] * b[0] - a[0] * b[2],
  a[0] * b[1] - a[1] * b[0],
];
const norm = (a: Vec3) => Math.hypot(a[0], a[1], a[2]);
const normalize = (a: Vec3): Vec3 => scale(a, 1 / norm(a));

export function orbitPosition(state: OrbitState): Vec3 {
  const ce = Math.cos(state.elevation);
  return add(state.target, [
    state.radius * ce * Math.cos(state.azimuth),
    state.radius * Math.sin(state.elevation),
    state.radius * ce * Math.sin(state.azimuth),
  ]);
}

export function orbitUpdate(
  state: OrbitState,
  input: OrbitInput,
  limits: OrbitLimits = { minRadius: 0.5, maxRadius: 50 }
): OrbitState {
  const next = { ...state, target: [...state.target] as Vec3 };
  switch (input.kind) {
    case "drag":
      next.azimuth = state.azimuth + DRAG_GAIN * input.dx;
      next.elevation = clamp(state.elevation + DRAG_GAIN * input.dy, -ELEVATION_LIMIT, ELEVATION_LIMIT);
      break;
    case "scroll":
      next.radius = clamp(state.radius * Math.exp(SCROLL_GAIN * input.dz), limits.minRadius, limits.maxRadius);
      break;
    case "pan": {
      // translate the target in the view plane (camera right / camera up)
      const pos = orbitPosition(state);
      const forward = normalize(sub(state.target, pos));
      const down: Vec3 = [0, -1, 0];
      const right = normalize(cross(down, forward));
      const up = normalize(cross(right, forward));
      const k = PAN_GAIN * state.radius;
      next.target = add(state.target, add(scale(right, -input.dx * k), scale(up, input.dy * k)));
      break;
    }
  }
  return next;
}

/** Camera-to-world rotation as a [w, x, y, z] unit quaternion. */
export function lookAtQuaternion(position: Vec3, target: Vec3, up: Vec3 = [0, 1, 0]): [number, number, number, number] {
  const forward = normalize(sub(target, position));
  const down0: Vec3 = [-up[0], -up[1], -up[2]];
  let right = cross(down0, forward);
  const rn = norm(right);
  if (rn < 1e-9) {
    // looking straight along up; pick any orthogonal right axis
    right = normalize(cross([0, 0, 1], forward));
  } else {
    right = scale(right, 1 / rn);
  }
  const down = cross(forward, right);
  // column-major rotation with columns (right, down, forward)
  const m00 = right[0], m01 = down[0], m02 = forward[0];
  const m10 = right[1], m11 = down[1], m12 = forward[1];
  const m20 = right[2], m21 = down[2], m22 = forward[2];
  const tr = m00 + m11 + m22;
  let w: number, x: number, y: number, z: number;
  if (tr > 0) {
    const s = Math.sqrt(tr + 1) * 2;
    w = s / 4;
    x = (m21 - m12) / s;
    y = (m02 - m20) / s;
    z = (m10 - m01) / s;
  } else if (m00 > m11 && m00 > m22) {
    const s = Math.sqrt(1 + m00 - m11 - m22) * 2;
    w = (m21 - m12) / s;
    x = s / 4;
    y = (m01 + m10) / s;
    z = (m02 + m20) / s;
  } else if (m11 > m22) {
    const s = Math.sqrt(1 + m11 - m00 - m22) * 2;
    w = (m02 - m20) / s;
    x = (m01 + m10) / s;
    y = s / 4;
    z = (m12 + m21) / s;
  } else {
    const s = Math.sqrt(1 + m22 - m00 - m11) * 2;
    w = (m10 - m01) / s;
    x = (m02 + m20) / s;
    y = (m12 + m21) / s;
    z = s / 4;
  }
  const n = Math.hypot(w, x, y, z);
  return [w / n, x / n, y / n, z / n];
}

export interface PoseMessage {
  v: 1;
  request_id: number;
  position: [number, number, number];
  orientation: [number, number, number, number];
  fov_deg: number;
  width: number;
  height: number;
}

export function poseFromOrbit(state: OrbitState, requestId: number, width: number, height: number): PoseMessage {
  const pos = orbitPosition(state);
  return {
    v: 1,
    request_id: requestId,
    position: pos,
    orientation: lookAtQuaternion(pos, state.target),
    fov_deg: state.fovDeg,
    width,
    height,
  };
}
