/**
 * The announcer's shot view: avatar billboards projected through the live
 * camera, an optional thirds grid, and the current spec caption.
 */

import { project } from './projection.js';
import type { SnapshotMessage } from './protocol.js';
import type { ViewerState } from './state.js';

export const VIEW_W = 960;
export const VIEW_H = 540;

const FACE_HEIGHT = 0.92 * 1.7;
const HEAD_HEIGHT = 1.7;

function fmt(x: number): string {
  return x.toFixed(1);
}

export interface ViewportOptions {
  thirdsOverlay?: boolean;
}

export function announcerViewport(state: ViewerState, options: ViewportOptions = {}): string {
  const thirds = options.thirdsOverlay ?? true;
  const snapshot = state.snapshot;
  const caption = state.currentSpec ?? (snapshot ? `${snapshot.camera.mode} / ${snapshot.camera.phase}` : 'waiting for stream');

  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${VIEW_W}" height="${VIEW_H}" viewBox="0 0 ${VIEW_W} ${VIEW_H}">`,
    `<rect x="0" y="0" width="${VIEW_W}" height="${VIEW_H}" fill="#182028"/>`,
  ];
  if (snapshot) {
    parts.push(...drawBillboards(snapshot));
  }
  if (thirds) {
    for (const x of [VIEW_W / 3, (2 * VIEW_W) / 3]) {
      parts.push(
        `<line x1="${fmt(x)}" y1="0" x2="${fmt(x)}" y2="${VIEW_H}" stroke="#4d5a66" stroke-width="1" data-layer="thirds"/>`,
      );
    }
    for (const y of [VIEW_H / 3, (2 * VIEW_H) / 3]) {
      parts.push(
        `<line x1="0" y1="${fmt(y)}" x2="${VIEW_W}" y2="${fmt(y)}" stroke="#4d5a66" stroke-width="1" data-layer="thirds"/>`,
      );
    }
  }
  parts.push(
    `<text x="12" y="${VIEW_H - 12}" fill="#f0f0f0" font-size="16" data-layer="caption">${caption}</text>`,
  );
  parts.push('</svg>');
  return parts.join('\n');
}

function drawBillboards(snapshot: SnapshotMessage): string[] {
  const pose = {
    pos: snapshot.camera.pos,
    focus: snapshot.camera.focus,
    fov: snapshot.camera.fov,
  };
  const parts: string[] = [];
  const byDepth = [...snapshot.avatars].sort((a, b) => {
    const da = (a.pos[0] - pose.pos[0]) ** 2 + (a.pos[1] - pose.pos[1]) ** 2;
    const db = (b.pos[0] - pose.pos[0]) ** 2 + (b.pos[1] - pose.pos[1]) ** 2;
    return db - da;
  });
  for (const avatar of byDepth) {
    const face = project(
      pose,
      [avatar.pos[0], avatar.pos[1], FACE_HEIGHT],
      VIEW_W,
      VIEW_H,
    );
    if (!face.visible) continue;
    const head = project(pose, [avatar.pos[0], avatar.pos[1], HEAD_HEIGHT], VIEW_W, VIEW_H);
    const feet = project(pose, [avatar.pos[0], avatar.pos[1], 0], VIEW_W, VIEW_H);
    if (Number.isNaN(head.y) || Number.isNaN(feet.y)) continue;
    const h = Math.max(3, feet.y - head.y);
    const w = h * 0.35;
    parts.push(
      `<rect x="${fmt(face.x - w / 2)}" y="${fmt(head.y)}" width="${fmt(w)}" height="${fmt(h)}" ` +
        `fill="#7aa5c4" data-avatar="${avatar.id}" data-face-x="${fmt(face.x)}"/>`,
    );
  }
  return parts;
}
