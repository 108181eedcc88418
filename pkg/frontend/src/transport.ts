/** Browser transport: one WebSocket carrying the NDJSON payloads as text
 * frames, with flat 1 s reconnect so a dropped connection resends the
 * queued buffer. */

import type { ClientMessage, ServerMessage } from "./protocol.js";
import { decodeServer, encode } from "./protocol.js";

export interface Connection {
  send(message: ClientMessage): void;
  close(): void;
}

export function connectWebSocket(
  url: string,
  onMessage: (m: ServerMessage) => void,
  onUp: (up: boolean) => void,
): Connection {
  let socket: WebSocket | null = null;
  let closed = false;

  const open = () => {
    socket = new WebSocket(url);
    socket.onopen = () => onUp(true);
    socket.onmessage = (ev) => {
      const message = decodeServer(String(ev.data));
      if (message !== null) onMessage(message);
    };
    socket.onclose = () => {
      onUp(false);
      socket = null;
      if (!closed) setTimeout(open, 1000);
    };
    socket.onerror = () => socket?.close();
  };
  open();

  return {
    send(message: ClientMessage): void {
      if (socket !== null && socket.readyState === WebSocket.OPEN) {
        socket.send(encode(message));
      }
    },
    close(): void {
      closed = true;
      socket?.close();
    },
  };
}
