/**
 * Perspective projection of world points into viewport pixels.
 *
 * Independent reimplementation of the engine's camera math (z-up look-at,
 * vertical fov, viewport aspect); the test suite pins it to engine-exported
 * golden vectors within a pixel.
 */

export type Vec3 = [number, number, number];

export interface Pose {
  pos: Vec3;
  focus: Vec3;
  fov: number; // vertical, radians
}

export interface Projected {
  x: number;
  y: number;
  visible: boolean;
}

const UP: Vec3 = [0, 0, 1];

function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

function dot(a: Vec3, b: Vec3): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

function cross(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

function norm(a: Vec3): number {
  return Math.sqrt(dot(a, a));
}

function normalize(a: Vec3): Vec3 {
  const n = norm(a);
  return [a[0] / n, a[1] / n, a[2] / n];
}

export function cameraBasis(pose: Pose): { forward: Vec3; right: Vec3; up: Vec3 } {
  const forward = normalize(sub(pose.focus, pose.pos));
  let rightRaw = cross(forward, UP);
  if (norm(rightRaw) < 1e-9) {
    // Looking straight up/down: same +y fallback as the engine.
    rightRaw = cross(forward, [0, 1, 0]);
  }
  const right = normalize(rightRaw);
  const up = cross(right, forward);
  return { forward, right, up };
}

export function project(
  pose: Pose,
  point: Vec3,
  width: number,
  height: number,
): Projected {
  const { forward, right, up } = cameraBasis(pose);
  const rel = sub(point, pose.pos);
  const z = dot(rel, forward);
  if (z <= 1e-12) {
    return { x: NaN, y: NaN, visible: false };
  }
  const x = dot(rel, right);
  const y = dot(rel, up);
  const tanV = Math.tan(pose.fov / 2);
  const tanH = tanV * (width / height);
  const px = (width / 2) * (1 + x / z / tanH);
  const py = (height / 2) * (1 - y / z / tanV);
  const visible = Math.abs(x / z) <= tanH && Math.abs(y / z) <= tanV;
  return { x: px, y: py, visible };
}
