/** Node-side NDJSON TCP client. The integration tests and the scripted
 * acceptance session drive the same EditorModel through this transport
 * that the browser drives through WebSocket. */

import * as net from "node:net";

import type { ClientMessage, ServerMessage } from "./protocol.js";
import { decodeServer, encode } from "./protocol.js";

export class NdjsonClient {
  readonly received: ServerMessage[] = [];
  private handlers: Array<(m: ServerMessage) => void> = [];
  private buffer = "";

  private constructor(private readonly socket: net.Socket) {
    socket.setEncoding("utf-8");
    socket.on("data", (chunk: string) => {
      this.buffer += chunk;
      let nl;
      while ((nl = this.buffer.indexOf("\n")) >= 0) {
        const line = this.buffer.slice(0, nl);
        this.buffer = this.buffer.slice(nl + 1);
        const message = decodeServer(line);
        if (message !== null) {
          this.received.push(message);
          for (const h of this.handlers) h(message);
        }
      }
    });
  }

  static connect(port: number, host = "127.0.0.1"): Promise<NdjsonClient> {
    return new Promise((resolve, reject) => {
      const socket = net.createConnection({ port, host }, () =>
        resolve(new NdjsonClient(socket)),
      );
      socket.once("error", reject);
    });
  }

  onMessage(handler: (m: ServerMessage) => void): void {
    this.handlers.push(handler);
  }

  send(message: ClientMessage): void {
    this.socket.write(encode(message) + "\n");
  }

  /** Poll the backlog + live traffic until a message satisfies pred. */
  waitFor(
    pred: (m: ServerMessage) => boolean,
    timeoutMs = 30000,
  ): Promise<ServerMessage> {
    const hit = this.received.find(pred);
    if (hit !== undefined) return Promise.resolve(hit);
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => {
        reject(
          new Error(
            `timed out; saw ${JSON.stringify(this.received.slice(-5))}`,
          ),
        );
      }, timeoutMs);
      this.onMessage((m) => {
        if (pred(m)) {
          clearTimeout(timer);
          resolve(m);
        }
      });
    });
  }

  close(): void {
    this.socket.end();
    this.socket.destroy();
  }
}
