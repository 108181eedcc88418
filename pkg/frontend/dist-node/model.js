/** Editor state machine, transport- and DOM-free so it is fully testable.
 *
 * The buffer is the user's; the span table and status cache always mirror
 * the latest `assigned` version from the server, and statuses for any
 * other version are dropped on arrival. Outbound traffic is full_text
 * only; the server computes the span-minimal diff.
 */
export const realClock = {
    setTimeout: (fn, ms) => setTimeout(fn, ms),
    clearTimeout: (handle) => clearTimeout(handle),
};
/** Strip (possibly nested) comments and surrounding whitespace. */
export function stripTrivia(text) {
    let out = "";
    let depth = 0;
    let i = 0;
    while (i < text.length) {
        if (text.startsWith("(*", i)) {
            depth += 1;
            i += 2;
        }
        else if (depth > 0 && text.startsWith("*)", i)) {
            depth -= 1;
            i += 2;
        }
        else {
            if (depth === 0)
                out += text[i];
            i += 1;
        }
    }
    return out.trim();
}
export function spanKind(raw) {
    const head = stripTrivia(raw).split(/\s+/, 1)[0] ?? "";
    if (head === "lemma")
        return "lemma";
    if (head === "def")
        return "def";
    if (head === "proof" || head === "proof.")
        return "proof";
    if (head === "qed" || head === "qed.")
        return "qed";
    return "step";
}
export class EditorModel {
    constructor(send, clock = realClock) {
        this.send = send;
        this.clock = clock;
        this.text = "";
        /** last version sent; the client owns version numbering */
        this.sentVersion = 0;
        /** latest version the server acknowledged with `assigned` */
        this.assignedVersion = 0;
        this.spans = [];
        this.statuses = new Map();
        this.quiescent = true;
        /** hammer depth, the settings field */
        this.depth = 8;
        this.toasts = [];
        this.suggestion = null;
        this.connected = true;
        this.debounceMs = 300;
        this.debounce = null;
        this.queuedFlush = false;
        this.nextQueryId = 1;
        this.queryTargets = new Map();
    }
    /** One keystroke. Buffers and (re)arms the debounce; never blocks. */
    setText(text) {
        if (text === this.text)
            return;
        this.text = text;
        if (this.debounce !== null)
            this.clock.clearTimeout(this.debounce);
        this.debounce = this.clock.setTimeout(() => {
            this.debounce = null;
            this.flush();
        }, this.debounceMs);
    }
    get flushPending() {
        return this.debounce !== null || this.queuedFlush;
    }
    /** Send the buffer now. Offline sends queue once; the latest buffer wins. */
    flush() {
        if (this.debounce !== null) {
            this.clock.clearTimeout(this.debounce);
            this.debounce = null;
        }
        if (!this.connected) {
            this.queuedFlush = true;
            return;
        }
        this.sentVersion += 1;
        this.quiescent = false;
        this.send({
            type: "full_text",
            new_version: this.sentVersion,
            text: this.text,
        });
    }
    setConnected(up) {
        this.connected = up;
        if (up && this.queuedFlush) {
            this.queuedFlush = false;
            this.flush();
        }
    }
    onMessage(m) {
        switch (m.type) {
            case "assigned": {
                if (m.version < this.assignedVersion)
                    return;
                this.assignedVersion = m.version;
                // a reconnect snapshot can be ahead of anything we sent
                if (m.version > this.sentVersion)
                    this.sentVersion = m.version;
                this.spans = m.spans;
                this.statuses = new Map(m.spans.map((s) => [s.id, { state: "pending", messages: [] }]));
                return;
            }
            case "status": {
                if (m.version !== this.assignedVersion)
                    return; // stale: dropped
                if (!this.statuses.has(m.span))
                    return;
                this.statuses.set(m.span, { state: m.state, messages: m.messages });
                return;
            }
            case "progress": {
                if (m.version === this.assignedVersion && m.state === "quiescent") {
                    this.quiescent = true;
                }
                return;
            }
            case "query_result": {
                const span = this.queryTargets.get(m.query_id);
                this.queryTargets.delete(m.query_id);
                if (span === undefined)
                    return;
                if (m.status === "ok") {
                    this.suggestion = { span, text: m.suggestion };
                }
                else {
                    this.toasts.push(`hammer ${m.status}`);
                }
                return;
            }
            case "protocol_error": {
                this.toasts.push(`protocol error: ${m.reason}`);
                return;
            }
        }
    }
    /** Report the visible span ids; scheduling hint only, fire-and-forget. */
    perspective(visible) {
        if (this.assignedVersion === 0)
            return;
        this.send({
            type: "perspective",
            version: this.assignedVersion,
            spans: visible,
        });
    }
    /** Ask the hammer about a span. Returns the query id. */
    hammer(spanId) {
        const queryId = this.nextQueryId++;
        this.queryTargets.set(queryId, spanId);
        this.send({
            type: "query",
            query_id: queryId,
            agent: "hammer",
            span: spanId,
            params: { depth: this.depth },
        });
        return queryId;
    }
    /** Apply the pending suggestion to the buffer and sync immediately.
     *
     * A step target is replaced in place; a header/proof/qed target has the
     * whole body between `proof.` and `qed.` replaced, since its suggestion
     * proves the statement from scratch. The buffer is rebuilt from the span
     * table, so acceptance is refused while unsynced keystrokes exist.
     */
    acceptSuggestion() {
        const s = this.suggestion;
        if (s === null)
            return false;
        this.suggestion = null;
        if (this.sentVersion !== this.assignedVersion || this.flushPending) {
            this.toasts.push("document changed; run the hammer again");
            return false;
        }
        const idx = this.spans.findIndex((x) => x.id === s.span);
        if (idx < 0) {
            this.toasts.push("suggested span no longer exists");
            return false;
        }
        const texts = this.spans.map((x) => x.text);
        const kind = spanKind(texts[idx]);
        if (kind === "def") {
            this.toasts.push("nothing to prove here");
            return false;
        }
        if (kind === "step") {
            texts[idx] = s.text;
        }
        else {
            let proofAt = Math.min(kind === "lemma" ? idx + 1 : idx, texts.length - 1);
            while (proofAt > 0 && spanKind(texts[proofAt] ?? "") !== "proof")
                proofAt -= 1;
            let qedAt = proofAt + 1;
            while (qedAt < texts.length && spanKind(texts[qedAt] ?? "") !== "qed")
                qedAt += 1;
            if (spanKind(texts[proofAt] ?? "") !== "proof" || qedAt >= texts.length) {
                this.toasts.push("no proof body to fill");
                return false;
            }
            texts.splice(proofAt + 1, qedAt - proofAt - 1, s.text);
        }
        this.text = texts.join("\n");
        this.flush();
        return true;
    }
}
