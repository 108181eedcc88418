/** Pure presentation maps: span state to gutter mark, statuses to the
 * error panel's rows. */
const MARKS = {
    pending: "grey",
    running: "amber",
    finished: "green",
    failed: "red",
    cancelled: "struck-grey",
};
export function gutterMark(state) {
    return MARKS[state];
}
/** Rows for every message on every span, in document order, with the line
 * each span starts on so the panel can navigate. */
export function panelRows(spans, statuses) {
    const rows = [];
    let line = 1;
    for (const span of spans) {
        const status = statuses.get(span.id);
        for (const m of status?.messages ?? []) {
            rows.push({
                span: span.id,
                line,
                severity: m.severity,
                text: m.text,
                offset: m.offset,
            });
        }
        line += span.text.split("\n").length;
    }
    return rows;
}
