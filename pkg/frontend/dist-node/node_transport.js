/** Node-side NDJSON TCP client. The integration tests and the scripted
 * acceptance session drive the same EditorModel through this transport
 * that the browser drives through WebSocket. */
import * as net from "node:net";
import { decodeServer, encode } from "./protocol.js";
export class NdjsonClient {
    constructor(socket) {
        this.socket = socket;
        this.received = [];
        this.handlers = [];
        this.buffer = "";
        socket.setEncoding("utf-8");
        socket.on("data", (chunk) => {
            this.buffer += chunk;
            let nl;
            while ((nl = this.buffer.indexOf("\n")) >= 0) {
                const line = this.buffer.slice(0, nl);
                this.buffer = this.buffer.slice(nl + 1);
                const message = decodeServer(line);
                if (message !== null) {
                    this.received.push(message);
                    for (const h of this.handlers)
                        h(message);
                }
            }
        });
    }
    static connect(port, host = "127.0.0.1") {
        return new Promise((resolve, reject) => {
            const socket = net.createConnection({ port, host }, () => resolve(new NdjsonClient(socket)));
            socket.once("error", reject);
        });
    }
    onMessage(handler) {
        this.handlers.push(handler);
    }
    send(message) {
        this.socket.write(encode(message) + "\n");
    }
    /** Poll the backlog + live traffic until a message satisfies pred. */
    waitFor(pred, timeoutMs = 30000) {
        const hit = this.received.find(pred);
        if (hit !== undefined)
            return Promise.resolve(hit);
        return new Promise((resolve, reject) => {
            const timer = setTimeout(() => {
                reject(new Error(`timed out; saw ${JSON.stringify(this.received.slice(-5))}`));
            }, timeoutMs);
            this.onMessage((m) => {
                if (pred(m)) {
                    clearTimeout(timer);
                    resolve(m);
                }
            });
        });
    }
    close() {
        this.socket.end();
        this.socket.destroy();
    }
}
