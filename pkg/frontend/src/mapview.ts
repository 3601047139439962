/**
 * Top-down world map as an SVG string: bounds, obstacles, POIs, avatar dots
 * with facing ticks, and the camera with its frustum wedge.
 */

import type { SnapshotMessage, WorldGeometry } from './protocol.js';
import type { ViewerState } from './state.js';

const MAP_W = 600;
const MAP_H = 400;

function fmt(x: number): string {
  return x.toFixed(1);
}

export function mapView(state: ViewerState): string {
  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${MAP_W}" height="${MAP_H}" viewBox="0 0 ${MAP_W} ${MAP_H}">`,
  ];
  const world = state.world;
  const snapshot = state.snapshot;
  const disconnected = state.status !== 'connected';

  parts.push(`<rect x="0" y="0" width="${MAP_W}" height="${MAP_H}" fill="#101820"/>`);
  if (world) {
    parts.push(...drawWorld(world, snapshot));
  }
  if (disconnected) {
    parts.push(
      `<rect x="0" y="0" width="${MAP_W}" height="${MAP_H}" fill="#888888" opacity="0.6" data-overlay="disconnected"/>`,
      `<text x="${MAP_W / 2}" y="${MAP_H / 2}" fill="#ffffff" font-size="22" text-anchor="middle">disconnected - reconnecting...</text>`,
    );
  }
  parts.push('</svg>');
  return parts.join('\n');
}

function drawWorld(world: WorldGeometry, snapshot: SnapshotMessage | null): string[] {
  const [x0, y0, x1, y1] = world.bounds;
  const sx = MAP_W / (x1 - x0);
  const sy = MAP_H / (y1 - y0);
  const px = (x: number) => (x - x0) * sx;
  // Screen y grows downward; world y grows upward.
  const py = (y: number) => MAP_H - (y - y0) * sy;

  const parts: string[] = [
    `<rect x="0" y="0" width="${MAP_W}" height="${MAP_H}" fill="#16220c" data-layer="bounds"/>`,
  ];
  for (const box of world.obstacles) {
    parts.push(
      `<rect x="${fmt(px(box.x))}" y="${fmt(py(box.y + box.d))}" width="${fmt(box.w * sx)}" ` +
        `height="${fmt(box.d * sy)}" fill="#3a3f45" data-layer="obstacle"/>`,
    );
  }
  for (const poi of world.pois) {
    parts.push(
      `<circle cx="${fmt(px(poi.x))}" cy="${fmt(py(poi.y))}" r="4" fill="#5f8f3f" data-poi="${poi.name}"/>`,
      `<text x="${fmt(px(poi.x) + 6)}" y="${fmt(py(poi.y) - 4)}" fill="#9fb98f" font-size="10">${poi.name}</text>`,
    );
  }
  if (snapshot) {
    for (const avatar of snapshot.avatars) {
      const ax = px(avatar.pos[0]);
      const ay = py(avatar.pos[1]);
      const tickX = ax + Math.cos(avatar.yaw) * 8 * Math.sign(sx);
      const tickY = ay - Math.sin(avatar.yaw) * 8;
      parts.push(
        `<line x1="${fmt(ax)}" y1="${fmt(ay)}" x2="${fmt(tickX)}" y2="${fmt(tickY)}" stroke="#c9d4de" stroke-width="1"/>`,
        `<circle cx="${fmt(ax)}" cy="${fmt(ay)}" r="3" fill="#7aa5c4" data-avatar="${avatar.id}"/>`,
      );
    }
    parts.push(...drawCamera(snapshot, px, py));
  }
  return parts;
}

function drawCamera(
  snapshot: SnapshotMessage,
  px: (x: number) => number,
  py: (y: number) => number,
): string[] {
  const cam = snapshot.camera;
  const cx = px(cam.pos[0]);
  const cy = py(cam.pos[1]);
  const heading = Math.atan2(cam.focus[1] - cam.pos[1], cam.focus[0] - cam.pos[0]);
  const half = cam.fov / 2 + 0.35; // widen the wedge a little for legibility
  const reach = 40;
  const leftX = px(cam.pos[0] + Math.cos(heading + half) * reach);
  const leftY = py(cam.pos[1] + Math.sin(heading + half) * reach);
  const rightX = px(cam.pos[0] + Math.cos(heading - half) * reach);
  const rightY = py(cam.pos[1] + Math.sin(heading - half) * reach);
  return [
    `<polygon points="${fmt(cx)},${fmt(cy)} ${fmt(leftX)},${fmt(leftY)} ${fmt(rightX)},${fmt(rightY)}" ` +
      `fill="#e0b44a" opacity="0.25" data-layer="frustum"/>`,
    `<circle cx="${fmt(cx)}" cy="${fmt(cy)}" r="5" fill="#e0b44a" data-layer="camera" ` +
      `data-mode="${cam.mode}" data-phase="${cam.phase}"/>`,
  ];
}
