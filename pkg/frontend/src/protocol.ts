/** Wire messages, mirrored from the server's schema. One JSON object per
 * NDJSON line or WebSocket text frame. */

export interface SpanInfo {
  id: number;
  text: string;
}

export interface StatusText {
  severity: string;
  text: string;
  offset: number;
}

export type SpanState =
  | "pending"
  | "running"
  | "finished"
  | "failed"
  | "cancelled";

export type ServerMessage =
  | { type: "assigned"; version: number; spans: SpanInfo[] }
  | {
      type: "status";
      version: number;
      span: number;
      state: SpanState;
      messages: StatusText[];
    }
  | {
      type: "query_result";
      query_id: number;
      status: "ok" | "failed" | "cancelled";
      suggestion: string;
    }
  | { type: "progress"; version: number; state: "quiescent" }
  | { type: "protocol_error"; reason: string };

export type WireEdit =
  | { op: "insert_after"; anchor: number; text: string }
  | { op: "remove"; id: number }
  | { op: "replace"; id: number; text: string };

export type ClientMessage =
  | { type: "full_text"; new_version: number; text: string }
  | {
      type: "update";
      old_version: number;
      new_version: number;
      edits: WireEdit[];
    }
  | { type: "perspective"; version: number; spans: number[] }
  | {
      type: "query";
      query_id: number;
      agent: "hammer";
      span: number;
      params: { depth: number };
    }
  | { type: "cancel_query"; query_id: number }
  | { type: "shutdown" };

export function encode(message: ClientMessage): string {
  return JSON.stringify(message);
}

/** Parse one inbound line/frame; null for anything that is not a message
 * object (the server never sends such lines, so dropping is safe). */
export function decodeServer(line: string): ServerMessage | null {
  let value: unknown;
  try {
    value = JSON.parse(line);
  } catch {
    return null;
  }
  if (typeof value !== "object" || value === null || !("type" in value)) {
    return null;
  }
  return value as ServerMessage;
}
