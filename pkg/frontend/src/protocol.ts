/**
 * Wire protocol: 4-byte big-endian length prefix, then UTF-8 JSON.
 * Mirrors the gateway's framing; the decoder is incremental so TCP chunk
 * boundaries never matter.
 */

export interface WorldGeometry {
  bounds: [number, number, number, number];
  pois: { name: string; x: number; y: number }[];
  obstacles: { x: number; y: number; w: number; d: number; h: number }[];
}

export interface HelloMessage {
  type: 'hello';
  session: string;
  world: WorldGeometry;
  seq: number;
}

export interface ConfigMessage {
  type: 'config';
  t: number;
  transition_duration: number;
  shot_duration: number;
  f: number;
  fetch_period: number;
  global_coefficient: number;
  seq: number;
}

export interface SnapshotAvatar {
  id: number;
  pos: [number, number, number];
  yaw: number;
  phase: string;
}

export interface SnapshotCamera {
  pos: [number, number, number];
  focus: [number, number, number];
  fov: number;
  mode: string;
  phase: string;
}

export interface SnapshotMessage {
  type: 'snapshot';
  t: number;
  avatars: SnapshotAvatar[];
  camera: SnapshotCamera;
  seq: number;
}

export interface EventMessage {
  type: 'event';
  t: number;
  id: string;
  kind: string;
  subjects: number[];
  score: number;
  seq: number;
}

export interface ShotMessage {
  type: 'shot';
  t: number;
  event_id: string;
  spec: string;
  seq: number;
}

export interface PromptMessage {
  type: 'prompt';
  t: number;
  kind: 'composition' | 'pacing';
  context: string | null;
  seq: number;
}

export interface ErrorMessage {
  type: 'error';
  error: string;
  seq: number;
}

export type ServerMessage =
  | HelloMessage
  | ConfigMessage
  | SnapshotMessage
  | EventMessage
  | ShotMessage
  | PromptMessage
  | ErrorMessage;

export type FeedbackKind = 'comp_up' | 'comp_down' | 'speed_up' | 'slow_down';

export interface FeedbackOut {
  type: 'feedback';
  kind: FeedbackKind;
  context?: string | null;
}

export interface SetConfigOut {
  type: 'set_config';
  transition_duration?: number;
  shot_duration?: number;
  f?: number;
  fetch_period?: number;
}

export type ClientMessage = FeedbackOut | SetConfigOut;

export const MAX_FRAME = 1_000_000;

export function encodeFrame(message: ClientMessage): Buffer {
  const payload = Buffer.from(JSON.stringify(message), 'utf8');
  const frame = Buffer.allocUnsafe(4 + payload.length);
  frame.writeUInt32BE(payload.length, 0);
  payload.copy(frame, 4);
  return frame;
}

/** Streaming decoder: feed raw socket chunks, get complete messages out. */
export class FrameDecoder {
  private buffer: Buffer = Buffer.alloc(0);

  feed(chunk: Buffer): ServerMessage[] {
    this.buffer = this.buffer.length === 0 ? chunk : Buffer.concat([this.buffer, chunk]);
    const out: ServerMessage[] = [];
    for (;;) {
      if (this.buffer.length < 4) break;
      const length = this.buffer.readUInt32BE(0);
      if (length === 0 || length > MAX_FRAME) {
        throw new Error(`bad frame length ${length}`);
      }
      if (this.buffer.length < 4 + length) break;
      const payload = this.buffer.subarray(4, 4 + length).toString('utf8');
      this.buffer = this.buffer.subarray(4 + length);
      out.push(JSON.parse(payload) as ServerMessage);
    }
    return out;
  }
}
