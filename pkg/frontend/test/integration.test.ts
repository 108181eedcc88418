/** End-to-end: the real EditorModel wired to a live server subprocess over
 * the NDJSON TCP transport. Needs python3 and the installed backend. */

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { spawn } from "node:child_process";
import type { ChildProcess } from "node:child_process";
import net from "node:net";
import { fileURLToPath } from "node:url";

import { gutterMark } from "../src/gutter.ts";
import { EditorModel, realClock } from "../src/model.ts";
import { NdjsonClient } from "../src/node_transport.ts";

const REPO_ROOT = fileURLToPath(new URL("../..", import.meta.url));

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = net.createServer();
    probe.on("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const addr = probe.address();
      if (addr === null || typeof addr === "string") {
        reject(new Error("no port assigned"));
        return;
      }
      probe.close(() => resolve(addr.port));
    });
  });
}

const sleep = (ms: number) => new Promise((r) => setTimeout(r, ms));

let server: ChildProcess | null = null;
let client: NdjsonClient;
let model: EditorModel;
const statusLog: string[] = [];
let pendingOnAssign = false;

describe("live server session", () => {
  beforeAll(async () => {
    const port = await freePort();
    server = spawn(
      "python3",
      ["-m", "proofstream.cli", "serve", "--port", String(port)],
      { cwd: REPO_ROOT, stdio: "ignore" },
    );
    const deadline = Date.now() + 15000;
    for (;;) {
      try {
        client = await NdjsonClient.connect(port);
        break;
      } catch (err) {
        if (Date.now() > deadline) throw err;
        await sleep(150);
      }
    }
    model = new EditorModel((m) => client.send(m), realClock);
    client.onMessage((m) => model.onMessage(m));
    client.onMessage((m) => {
      // runs after the model's handler, so the model state is fresh
      if (m.type === "status") statusLog.push(`${m.span}:${m.state}`);
      if (m.type === "assigned") {
        pendingOnAssign = [...model.statuses.values()].every(
          (s) => s.state === "pending",
        );
      }
    });
  }, 30000);

  afterAll(() => {
    client?.close();
    server?.kill();
  });

  let lastVersion = 0;

  async function quiesced(): Promise<number> {
    const floor = lastVersion;
    const a = await client.waitFor(
      (m) => m.type === "assigned" && m.version > floor,
      20000,
    );
    const version = a.type === "assigned" ? a.version : 0;
    lastVersion = version;
    await client.waitFor(
      (m) => m.type === "progress" && m.version === version,
      30000,
    );
    return version;
  }

  const marks = () =>
    model.spans.map((s) => gutterMark(model.statuses.get(s.id)!.state));

  it("debounces typing into one version and checks it green", { timeout: 60000 }, async () => {
    model.setText("lemma i : p -> p.");
    model.setText("lemma i : p -> p.\nproof.");
    model.setText("lemma i : p -> p.\nproof.\nsearch 6.\nqed.");
    const version = await quiesced();
    expect(version).toBe(1); // three keystrokes, one flush
    expect(pendingOnAssign).toBe(true); // every span started grey
    expect(model.quiescent).toBe(true);
    expect(model.spans).toHaveLength(4);
    expect(marks()).toEqual(["green", "green", "green", "green"]);
    // something was actually seen running along the way
    expect(statusLog.some((s) => s.endsWith(":running"))).toBe(true);
  });

  it("paints a failed step red and the unreachable tail struck-grey", { timeout: 60000 }, async () => {
    model.setText("lemma bad : p -> q.\nproof.\nintro h1.\nexact h1.\nqed.");
    await quiesced();
    expect(model.spans).toHaveLength(5);
    expect(marks()).toEqual(["green", "green", "green", "red", "struck-grey"]);
  });

  it("hammers the header and accepting the suggestion turns the document green", { timeout: 60000 }, async () => {
    model.setText("lemma i : p -> p.\nproof.\nqed.");
    await quiesced();
    const header = model.spans.find((s) => s.text.startsWith("lemma"));
    expect(header).toBeDefined();
    model.hammer(header!.id);
    await client.waitFor((m) => m.type === "query_result", 30000);
    expect(model.suggestion).toEqual({
      span: header!.id,
      text: "intro h1. exact h1.",
    });
    expect(model.acceptSuggestion()).toBe(true);
    expect(model.text).toBe("lemma i : p -> p.\nproof.\nintro h1. exact h1.\nqed.");
    await quiesced();
    expect(model.spans.length).toBeGreaterThanOrEqual(5);
    expect(new Set(marks())).toEqual(new Set(["green"]));
  });
});
