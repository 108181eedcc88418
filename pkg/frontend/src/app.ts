/** Browser wiring: textarea editor, status gutter, error panel, hammer
 * controls. All state lives in EditorModel; this file only renders it and
 * forwards DOM events. */

import { gutterMark, panelRows } from "./gutter.js";
import { EditorModel, realClock } from "./model.js";
import { connectWebSocket } from "./transport.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing #${id}`);
  return node as T;
}

const editor = el<HTMLTextAreaElement>("editor");
const gutter = el<HTMLDivElement>("gutter");
const panel = el<HTMLTableSectionElement>("panel-body");
const toasts = el<HTMLDivElement>("toasts");
const link = el<HTMLSpanElement>("link-state");
const depthField = el<HTMLInputElement>("depth");
const hammerButton = el<HTMLButtonElement>("hammer");
const acceptBar = el<HTMLDivElement>("accept-bar");
const acceptText = el<HTMLSpanElement>("accept-text");
const acceptButton = el<HTMLButtonElement>("accept");
const dismissButton = el<HTMLButtonElement>("dismiss");

let selectedSpan: number | null = null;
let shownToasts = 0;

const proto = location.protocol === "https:" ? "wss:" : "ws:";
const connection = connectWebSocket(
  `${proto}//${location.host}/ws`,
  (m) => {
    model.onMessage(m);
    render();
  },
  (up) => {
    model.setConnected(up);
    link.textContent = up ? "connected" : "reconnecting…";
    link.className = up ? "up" : "down";
  },
);
const model = new EditorModel((m) => connection.send(m), realClock);

editor.addEventListener("input", () => {
  model.setText(editor.value);
  render();
});

editor.addEventListener("scroll", sendPerspective);

function sendPerspective(): void {
  // map the visible line window back to span ids (span granularity)
  const lineHeight = 18;
  const first = Math.floor(editor.scrollTop / lineHeight) + 1;
  const last = first + Math.ceil(editor.clientHeight / lineHeight);
  const visible: number[] = [];
  let line = 1;
  for (const span of model.spans) {
    const lines = span.text.split("\n").length;
    if (line + lines > first && line <= last) visible.push(span.id);
    line += lines;
  }
  model.perspective(visible);
}

hammerButton.addEventListener("click", () => {
  const depth = parseInt(depthField.value, 10);
  if (Number.isFinite(depth) && depth >= 1) model.depth = depth;
  if (selectedSpan === null) {
    model.toasts.push("select a span first");
  } else {
    model.hammer(selectedSpan);
  }
  render();
});

acceptButton.addEventListener("click", () => {
  if (model.acceptSuggestion()) editor.value = model.text;
  render();
});

dismissButton.addEventListener("click", () => {
  model.suggestion = null;
  render();
});

function render(): void {
  gutter.replaceChildren(
    ...model.spans.map((span) => {
      const status = model.statuses.get(span.id);
      const row = document.createElement("div");
      row.className = `mark ${gutterMark(status?.state ?? "pending")}`;
      if (span.id === selectedSpan) row.classList.add("selected");
      const firstLine = span.text.split("\n")[0] ?? "";
      row.textContent = `${status?.state ?? "pending"}  ${firstLine}`;
      row.addEventListener("click", () => {
        selectedSpan = span.id === selectedSpan ? null : span.id;
        render();
      });
      return row;
    }),
  );

  panel.replaceChildren(
    ...panelRows(model.spans, model.statuses).map((r) => {
      const tr = document.createElement("tr");
      for (const cell of [
        `line ${r.line}`,
        r.severity,
        r.text,
        `@${r.offset}`,
      ]) {
        const td = document.createElement("td");
        td.textContent = cell;
        tr.appendChild(td);
      }
      return tr;
    }),
  );

  for (; shownToasts < model.toasts.length; shownToasts++) {
    const note = document.createElement("div");
    note.className = "toast";
    note.textContent = model.toasts[shownToasts] ?? "";
    toasts.appendChild(note);
    setTimeout(() => note.remove(), 4000);
  }

  const s = model.suggestion;
  acceptBar.style.display = s === null ? "none" : "flex";
  if (s !== null) acceptText.textContent = s.text;
}

render();
