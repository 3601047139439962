/**
 * TCP client for the announcer gateway (node runtime).
 */

import * as net from 'node:net';

import { ClientMessage, FrameDecoder, ServerMessage, encodeFrame } from './protocol.js';

export interface ClientHandlers {
  onMessage: (message: ServerMessage) => void;
  onClose?: () => void;
  onError?: (err: Error) => void;
}

export class AnnouncerClient {
  private socket: net.Socket | null = null;
  private decoder = new FrameDecoder();

  constructor(
    private readonly host: string,
    private readonly port: number,
    private readonly handlers: ClientHandlers,
  ) {}

  connect(): Promise<void> {
    return new Promise((resolve, reject) => {
      const socket = net.createConnection({ host: this.host, port: this.port });
      socket.once('connect', () => {
        this.socket = socket;
        resolve();
      });
      socket.once('error', (err) => {
        if (this.socket === null) reject(err);
        else this.handlers.onError?.(err);
      });
      socket.on('data', (chunk) => {
        let messages: ServerMessage[];
        try {
          messages = this.decoder.feed(chunk);
        } catch (err) {
          this.handlers.onError?.(err as Error);
          socket.destroy();
          return;
        }
        for (const message of messages) {
          this.handlers.onMessage(message);
        }
      });
      socket.on('close', () => {
        this.socket = null;
        this.handlers.onClose?.();
      });
    });
  }

  async send(message: ClientMessage): Promise<void> {
    const socket = this.socket;
    if (!socket || socket.destroyed) {
      throw new Error('not connected');
    }
    await new Promise<void>((resolve, reject) => {
      socket.write(encodeFrame(message), (err) => (err ? reject(err) : resolve()));
    });
  }

  close(): void {
    this.socket?.destroy();
    this.socket = null;
  }
}
