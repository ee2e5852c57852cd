// WebSocket transport: one JSON record per message, decode failures surface
// to the caller as null-message callbacks it can ignore.

import { decodeMessage, encodeCommand, type Command, type ServerMessage } from "./protocol.js";

export class SessionClient {
  private socket: WebSocket | null = null;

  constructor(
    private readonly url: string,
    private readonly onMessage: (message: ServerMessage) => void,
    private readonly onClose: () => void,
  ) {}

  connect(): void {
    const socket = new WebSocket(this.url);
    socket.onmessage = (event) => {
      const message = decodeMessage(String(event.data));
      if (message !== null) this.onMessage(message);
    };
    socket.onclose = () => this.onClose();
    socket.onerror = () => socket.close();
    this.socket = socket;
  }

  whenOpen(fn: () => void): void {
    const socket = this.socket;
    if (!socket) return;
    if (socket.readyState === WebSocket.OPEN) fn();
    else socket.addEventListener("open", fn, { once: true });
  }

  send(command: Command): boolean {
    if (!this.socket || this.socket.readyState !== WebSocket.OPEN) return false;
    this.socket.send(encodeCommand(command));
    return true;
  }

  close(): void {
    this.socket?.close();
  }
}
