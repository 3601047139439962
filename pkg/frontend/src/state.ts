/**
 * Viewer-side state: last snapshot, a bounded event/shot timeline, pending
 * prompts, and a mirror of the announcer's live tuning config.
 */

import type {
  ConfigMessage,
  PromptMessage,
  ServerMessage,
  SnapshotMessage,
  WorldGeometry,
} from './protocol.js';

export type ConnectionStatus = 'connecting' | 'connected' | 'disconnected';

export interface TimelineEntry {
  seq: number;
  t: number;
  label: string;
}

export const TIMELINE_LIMIT = 200;

export class ViewerState {
  status: ConnectionStatus = 'connecting';
  session: string | null = null;
  world: WorldGeometry | null = null;
  snapshot: SnapshotMessage | null = null;
  config: ConfigMessage | null = null;
  currentSpec: string | null = null;
  timeline: TimelineEntry[] = [];
  prompts: PromptMessage[] = [];
  errors: string[] = [];

  apply(message: ServerMessage): void {
    switch (message.type) {
      case 'hello':
        this.session = message.session;
        this.world = message.world;
        this.status = 'connected';
        break;
      case 'snapshot':
        this.snapshot = message;
        if (message.camera.phase === 'patrol') {
          this.currentSpec = null;
        }
        break;
      case 'config':
        this.config = message;
        break;
      case 'event':
        this.pushTimeline(message.seq, message.t, `event ${message.id} ${message.kind}`);
        break;
      case 'shot':
        this.currentSpec = message.spec;
        this.pushTimeline(message.seq, message.t, `shot ${message.spec}`);
        break;
      case 'prompt':
        this.prompts.push(message);
        break;
      case 'error':
        this.errors.push(message.error);
        break;
    }
  }

  private pushTimeline(seq: number, t: number, label: string): void {
    // Arrival order is seq order on a healthy connection; keep it explicit.
    this.timeline.push({ seq, t, label });
    this.timeline.sort((a, b) => a.seq - b.seq);
    if (this.timeline.length > TIMELINE_LIMIT) {
      this.timeline.splice(0, this.timeline.length - TIMELINE_LIMIT);
    }
  }

  markDisconnected(): void {
    this.status = 'disconnected';
  }

  takePrompt(): PromptMessage | undefined {
    return this.prompts.shift();
  }
}
