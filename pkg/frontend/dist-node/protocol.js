/** Wire messages, mirrored from the server's schema. One JSON object per
 * NDJSON line or WebSocket text frame. */
export function encode(message) {
    return JSON.stringify(message);
}
/** Parse one inbound line/frame; null for anything that is not a message
 * object (the server never sends such lines, so dropping is safe). */
export function decodeServer(line) {
    let value;
    try {
        value = JSON.parse(line);
    }
    catch {
        return null;
    }
    if (typeof value !== "object" || value === null || !("type" in value)) {
        return null;
    }
    return value;
}
