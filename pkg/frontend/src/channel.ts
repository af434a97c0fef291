/**
 * Ordered event subscription over the websocket channel.
 *
 * Connection contract: open the socket, send one handshake
 * `{session_id, role, last_seq?}`, then receive a welcome frame, the visible
 * backlog after `last_seq`, and finally live events. The channel tracks the
 * highest applied seq, so `connect()` after a drop resumes exactly where the
 * stream left off; anything the server re-sends below that mark is dropped
 * before it reaches the view.
 */

import type {
  ClientMessage,
  HelloMessage,
  Role,
  ServerFrame,
  SessionEvent,
  WelcomeFrame,
} from "./protocol.js";
import { parseServerFrame } from "./protocol.js";

/** The slice of WebSocket the channel needs; tests substitute a fake. */
export interface ChannelSocket {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((data: string) => void) | null;
  onclose: (() => void) | null;
}

export type SocketFactory = (url: string) => ChannelSocket;

export interface ChannelHandlers {
  onEvent: (event: SessionEvent) => void;
  onWelcome?: (frame: WelcomeFrame) => void;
  onAck?: (seqs: number[]) => void;
  onError?: (message: string) => void;
  onClose?: () => void;
}

export function browserSocketFactory(url: string): ChannelSocket {
  const ws = new WebSocket(url);
  const wrapper: ChannelSocket = {
    send: (data) => ws.send(data),
    close: () => ws.close(),
    onopen: null,
    onmessage: null,
    onclose: null,
  };
  ws.onopen = () => wrapper.onopen?.();
  ws.onmessage = (e) => wrapper.onmessage?.(String(e.data));
  ws.onclose = () => wrapper.onclose?.();
  return wrapper;
}

export class SessionChannel {
  readonly url: string;
  readonly sessionId: string;
  readonly role: Role;

  /** highest seq handed to onEvent; the resume point for reconnects */
  lastSeq = -1;
  connected = false;

  private socket: ChannelSocket | null = null;
  private readonly handlers: ChannelHandlers;
  private readonly socketFactory: SocketFactory;

  constructor(
    url: string,
    sessionId: string,
    role: Role,
    handlers: ChannelHandlers,
    socketFactory: SocketFactory = browserSocketFactory,
  ) {
    this.url = url;
    this.sessionId = sessionId;
    this.role = role;
    this.handlers = handlers;
    this.socketFactory = socketFactory;
  }

  connect(): void {
    if (this.socket) {
      throw new Error("channel already connected");
    }
    const socket = this.socketFactory(this.url);
    this.socket = socket;
    socket.onopen = () => {
      const hello: HelloMessage = {
        session_id: this.sessionId,
        role: this.role,
      };
      if (this.lastSeq >= 0) {
        hello.last_seq = this.lastSeq;
      }
      socket.send(JSON.stringify(hello));
    };
    socket.onmessage = (data) => this.handleFrame(parseServerFrame(data));
    socket.onclose = () => {
      this.socket = null;
      this.connected = false;
      this.handlers.onClose?.();
    };
  }

  private handleFrame(frame: ServerFrame): void {
    switch (frame.type) {
      case "welcome":
        this.connected = true;
        this.handlers.onWelcome?.(frame);
        break;
      case "event":
        if (frame.event.seq > this.lastSeq) {
          this.lastSeq = frame.event.seq;
          this.handlers.onEvent(frame.event);
        }
        break;
      case "ack":
        this.handlers.onAck?.(frame.seqs);
        break;
      case "error":
        this.handlers.onError?.(frame.error);
        break;
    }
  }

  /** One call, one frame on the wire. */
  send(message: ClientMessage): void {
    if (!this.socket) {
      throw new Error("channel is not connected");
    }
    this.socket.send(JSON.stringify(message));
  }

  close(): void {
    this.socket?.close();
  }
}

export function channelUrl(baseUrl: string): string {
  return baseUrl.replace(/^http/, "ws").replace(/\/$/, "") + "/ws";
}
