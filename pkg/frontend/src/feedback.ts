/**
 * The micro-feedback panel: composition thumbs at event ends, pacing emojis
 * every ten minutes.  One click sends exactly one message; dismissing sends
 * nothing; failed sends stay queued with a visible pending count.
 */

import type { ClientMessage, FeedbackKind, PromptMessage } from './protocol.js';

export type Sender = (message: ClientMessage) => Promise<void>;

export class FeedbackPanel {
  private active: PromptMessage | null = null;
  private pending: ClientMessage[] = [];
  sent = 0;

  constructor(private readonly send: Sender) {}

  get activePrompt(): PromptMessage | null {
    return this.active;
  }

  get pendingCount(): number {
    return this.pending.length;
  }

  show(prompt: PromptMessage): void {
    this.active = prompt;
  }

  /** Thumbs on a composition prompt; no-op without one. */
  async clickComposition(up: boolean): Promise<boolean> {
    const prompt = this.active;
    if (!prompt || prompt.kind !== 'composition' || !prompt.context) {
      return false;
    }
    this.active = null; // consumed before the send: a double click cannot re-fire
    await this.dispatch({
      type: 'feedback',
      kind: up ? 'comp_up' : 'comp_down',
      context: prompt.context,
    });
    return true;
  }

  /** Speed-up / slow-down on a pacing prompt. */
  async clickPacing(speedUp: boolean): Promise<boolean> {
    const prompt = this.active;
    if (!prompt || prompt.kind !== 'pacing') {
      return false;
    }
    this.active = null;
    await this.dispatch({
      type: 'feedback',
      kind: (speedUp ? 'speed_up' : 'slow_down') as FeedbackKind,
    });
    return true;
  }

  /** Ignoring a prompt leaves the announcer untouched. */
  dismiss(): void {
    this.active = null;
  }

  async retryPending(): Promise<void> {
    const queued = this.pending;
    this.pending = [];
    for (const message of queued) {
      await this.dispatch(message);
    }
  }

  private async dispatch(message: ClientMessage): Promise<void> {
    try {
      await this.send(message);
      this.sent += 1;
    } catch {
      this.pending.push(message);
    }
  }
}
