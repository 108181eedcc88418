"""End-to-end shipping checks, one test per release criterion.

Each test measures at its stated tolerance, prints a single
`acceptance [PASS|FAIL]` line (visible even under capture), and then
asserts, so a red run still reports every verdict.
"""

import collections
import json
import os
import random
import socket
import statistics
import subprocess
import sys
import time
from pathlib import Path

from support import COMMAND_POOL, Collector, batch_essences, essence

from proofstream.document import IdAllocator, diff_full_text, init_document
from proofstream.engine import Engine
from proofstream.kernel import FALSE, And, Atom, Impl, Or, neg, tautology_check
from proofstream.tactics import (
    NotFound,
    apply_step,
    dn_statement,
    initial_proof_state,
    replay,
    search,
)

ROOT = Path(__file__).resolve().parent.parent
GOLDEN = Path(__file__).resolve().parent / "golden"


def finish(capsys, name: str, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"acceptance [{'PASS' if ok else 'FAIL'}] {name}: {detail}", flush=True)
    assert ok, f"{name}: {detail}"


def wait_for(col: Collector, pred, timeout: float = 30.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        for m in list(col.messages):
            if pred(m):
                return m
        time.sleep(0.002)
    raise RuntimeError("condition not reached in time")


def assigned(version: int):
    return lambda m: m["type"] == "assigned" and m["version"] == version


def random_corpus_doc(rng: random.Random, span_budget: int = 40) -> str:
    out, used = [], 0
    for _ in range(rng.randint(1, 12)):
        entry = rng.choice(COMMAND_POOL)
        cost = entry.count(".")
        if used + cost > span_budget:
            break
        out.append(entry)
        used += cost
    return "\n".join(out) if out else "def seed := a."


# -- incremental checking agrees with a from-scratch check ---------------------------


def test_incremental_matches_batch_oracle(capsys):
    ok, detail = False, "did not run"
    try:
        rng = random.Random(20260815)
        t0 = time.monotonic()
        mismatches = []
        col = Collector()
        with Engine(1, emit=col) as eng:
            version = 0
            for doc_i in range(200):
                version += 1
                eng.handle_client(
                    {
                        "type": "full_text",
                        "new_version": version,
                        "text": random_corpus_doc(rng),
                    }
                )
                spans = wait_for(col, assigned(version))["spans"]
                for _ in range(rng.randint(0, 10)):
                    ids = [s["id"] for s in spans]
                    if not ids:
                        break
                    targets = rng.sample(ids, min(rng.randint(1, 3), len(ids)))
                    edits = []
                    for t in targets:
                        roll = rng.random()
                        if roll < 0.4:
                            edits.append(
                                {
                                    "op": "replace",
                                    "id": t,
                                    "text": rng.choice(COMMAND_POOL),
                                }
                            )
                        elif roll < 0.7:
                            edits.append(
                                {
                                    "op": "insert_after",
                                    "anchor": t,
                                    "text": rng.choice(COMMAND_POOL),
                                }
                            )
                        else:
                            edits.append({"op": "remove", "id": t})
                    version += 1
                    eng.handle_client(
                        {
                            "type": "update",
                            "old_version": version - 1,
                            "new_version": version,
                            "edits": edits,
                        }
                    )
                    spans = wait_for(col, assigned(version))["spans"]
                if not eng.wait_quiescent(60):
                    raise RuntimeError(f"doc {doc_i} never went quiescent")
                statuses = eng.snapshot_statuses()
                doc = eng.document()
                final_text = "\n".join(s.text.raw for s in doc.spans)
                got = [essence(statuses[s.span_id]) for s in doc.spans]
                want = batch_essences(final_text)
                if got != want:
                    mismatches.append(doc_i)
                col.clear()
        elapsed = time.monotonic() - t0
        ok = not mismatches and elapsed < 60.0
        detail = (
            f"200 documents with random edit scripts, "
            f"{len(mismatches)} disagreement(s) vs from-scratch check, "
            f"{elapsed:.1f}s (limit 60s)"
        )
    except Exception as e:
        detail = f"crashed: {type(e).__name__}: {e}"
    finish(capsys, "incremental == batch", ok, detail)


# -- every search-found proof is accepted by the truth-table oracle -------------------


ATOMS = tuple(Atom(n) for n in "abcdef")


def _rand_formula(rng: random.Random, depth: int):
    if depth == 0:
        return rng.choice(ATOMS) if rng.random() < 0.9 else FALSE
    a = _rand_formula(rng, depth - 1)
    b = _rand_formula(rng, depth - 1)
    roll = rng.random()
    if roll < 0.35:
        return Impl(a, b)
    if roll < 0.6:
        return And(a, b)
    if roll < 0.85:
        return Or(a, b)
    return neg(a)


def _candidate(rng: random.Random):
    # biased toward provable shapes so 1000 accepted lemmas arrive quickly,
    # with a tail of unbiased implications to keep the sample honest
    f = _rand_formula(rng, rng.randint(1, 2))
    g = _rand_formula(rng, 1)
    roll = rng.random()
    if roll < 0.25:
        return Impl(f, f)
    if roll < 0.45:
        return Impl(And(f, g), f)
    if roll < 0.6:
        return Impl(f, Or(g, f))
    if roll < 0.75:
        return Impl(neg(neg(f)), f)
    if roll < 0.85:
        return Impl(FALSE, f)
    return Impl(f, g)


def test_kernel_soundness_on_search_proofs(capsys):
    ok, detail = False, "did not run"
    try:
        rng = random.Random(97)
        t0 = time.monotonic()
        proved = 0
        tried = 0
        unsound = 0
        statement_drift = 0
        while proved < 1000:
            tried += 1
            if tried > 20000:
                raise RuntimeError("generator too weak to reach 1000 proofs")
            statement = _candidate(rng)
            state = initial_proof_state(statement)
            try:
                steps = search(state, 5, {})
            except NotFound:
                continue
            for step in steps:
                state = apply_step(state, step, {})
            thm = replay(state.derivation, {})
            proved += 1
            if thm.conclusion != statement:
                statement_drift += 1
            if not tautology_check([], thm.conclusion):
                unsound += 1
        elapsed = time.monotonic() - t0
        ok = unsound == 0 and statement_drift == 0
        detail = (
            f"{proved} search-proved lemmas out of {tried} candidates, "
            f"{unsound} truth-table rejections, "
            f"{statement_drift} conclusion mismatches, {elapsed:.1f}s"
        )
    except Exception as e:
        detail = f"crashed: {type(e).__name__}: {e}"
    finish(capsys, "kernel soundness", ok, detail)


# -- one edited proof body re-runs exactly one task --------------------------------


def _chain(plan):
    return [
        (item.span_id, item.state_after)
        for item in plan.items
        if hasattr(item, "state_after")
    ]


def test_edit_reuse_locality(capsys):
    ok, detail = False, "did not run"
    try:
        lemmas = [
            f"lemma l{i} : a -> a. proof. intro h1. exact h1. qed."
            for i in range(20)
        ]
        text = "\n".join(lemmas)
        col = Collector()
        with Engine(1, emit=col) as eng:
            eng.handle_client({"type": "full_text", "new_version": 1, "text": text})
            if not eng.wait_quiescent(60):
                raise RuntimeError("initial check never went quiescent")
            spans = wait_for(col, assigned(1))["spans"]
            if len(spans) != 100:
                raise RuntimeError(f"expected 100 spans, got {len(spans)}")
            chain_before = _chain(eng.current_plan())
            tenth_exact = spans[9 * 5 + 3]
            if tenth_exact["text"] != "exact h1.":
                raise RuntimeError(f"wrong target span: {tenth_exact}")
            eng.handle_client(
                {
                    "type": "update",
                    "old_version": 1,
                    "new_version": 2,
                    "edits": [
                        {"op": "replace", "id": tenth_exact["id"], "text": "search 2."}
                    ],
                }
            )
            if not eng.wait_quiescent(60):
                raise RuntimeError("re-check never went quiescent")
            env_runs, region_runs = eng.counters()
            chain_after = _chain(eng.current_plan())
            statuses = eng.snapshot_statuses()
            all_finished = all(
                statuses[s.span_id].state == "finished"
                for s in eng.document().spans
            )
        # proof bodies are outside the state chain, so the whole chain
        # (20 header hashes), not just the downstream part, must survive
        chain_same = chain_before == chain_after
        ok = (
            env_runs == 0
            and region_runs == 1
            and chain_same
            and all_finished
            and len(chain_after) == 20
        )
        detail = (
            f"100-span document, one step of the 10th lemma replaced: "
            f"{env_runs} env transactions (want 0), "
            f"{region_runs} region tasks (want 1), "
            f"state chain bit-identical: {chain_same}"
        )
    except Exception as e:
        detail = f"crashed: {type(e).__name__}: {e}"
    finish(capsys, "reuse locality", ok, detail)


# -- checking 8 equal regions on 4 workers beats 1 worker --------------------------


def _bench_wall_ms(neg: int, workers: int) -> int:
    proc = subprocess.run(
        [
            sys.executable,
            "-m",
            "proofstream.cli",
            "bench",
            "--lemmas",
            "8",
            "--neg",
            str(neg),
            "--workers",
            str(workers),
            "--json",
        ],
        capture_output=True,
        text=True,
        timeout=300,
        cwd=ROOT,
    )
    if proc.returncode != 0:
        raise RuntimeError(f"bench failed: {proc.stderr.strip()[-200:]}")
    return json.loads(proc.stdout)["wall_ms"]


def test_parallel_speedup(capsys):
    ok, detail = False, "did not run"
    try:
        t0 = time.monotonic()
        neg = None
        for n in (4, 5, 6, 7):
            state = initial_proof_state(dn_statement(n))
            t = time.monotonic()
            search(state, 2 * n + 2, {})
            if time.monotonic() - t >= 0.30:
                neg = n
                break
        if neg is None:
            raise RuntimeError("could not size a >=300ms region")
        w1 = [_bench_wall_ms(neg, 1) for _ in range(3)]
        w4 = [_bench_wall_ms(neg, 4) for _ in range(3)]
        med1 = statistics.median(w1)
        med4 = statistics.median(w4)
        elapsed = time.monotonic() - t0
        ok = med4 <= 0.45 * med1 and elapsed < 60.0
        detail = (
            f"8 lemmas at neg={neg}: median wall 4w {med4:.0f} ms vs "
            f"1w {med1:.0f} ms (need <= {0.45 * med1:.0f} ms), "
            f"{elapsed:.1f}s total, {os.cpu_count()} cpu(s) visible"
        )
    except Exception as e:
        detail = f"crashed: {type(e).__name__}: {e}"
    finish(capsys, "parallel speedup", ok, detail)


# -- edits stay responsive while a long search runs --------------------------------


class TimedCollector(Collector):
    def __init__(self):
        super().__init__()
        self.times = {}

    def __call__(self, message: dict) -> None:
        super().__call__(message)
        key = (message.get("type"), message.get("version"))
        self.times.setdefault(key, time.monotonic())


def test_reactivity_during_long_search(capsys):
    ok, detail = False, "did not run"
    try:
        assigned_deltas = []
        redispatch_deltas = []
        for _ in range(3):
            col = TimedCollector()
            with Engine(1, emit=col) as eng:
                slow = "lemma slow : ~~~~~~~~~~s -> s.\nproof.\nsearch 12.\nqed."
                eng.handle_client(
                    {"type": "full_text", "new_version": 1, "text": slow}
                )
                wait_for(
                    col,
                    lambda m: m["type"] == "status" and m["state"] == "running",
                )
                header = wait_for(col, assigned(1))["spans"][0]["id"]
                t0 = time.monotonic()
                eng.handle_client(
                    {
                        "type": "update",
                        "old_version": 1,
                        "new_version": 2,
                        "edits": [
                            {
                                "op": "replace",
                                "id": header,
                                "text": "lemma slow : ~~~~~~~~~~t -> t.",
                            }
                        ],
                    }
                )
                wait_for(col, assigned(2), timeout=10.0)
                assigned_deltas.append(col.times[("assigned", 2)] - t0)
                deadline = time.monotonic() + 10.0
                redispatch = None
                while redispatch is None and time.monotonic() < deadline:
                    for ev in eng.scheduler.log.events("dispatch"):
                        if ev.ts > t0:
                            redispatch = ev.ts - t0
                            break
                    time.sleep(0.002)
                if redispatch is None:
                    raise RuntimeError("worker never re-dispatched after the edit")
                redispatch_deltas.append(redispatch)
        med_a = statistics.median(assigned_deltas)
        med_d = statistics.median(redispatch_deltas)
        ok = med_a < 0.100 and med_d < 0.100
        detail = (
            f"median over 3 runs while `search 12` was running: "
            f"assigned reply {med_a * 1000:.1f} ms, "
            f"worker re-dispatch {med_d * 1000:.1f} ms (both need < 100 ms)"
        )
    except Exception as e:
        detail = f"crashed: {type(e).__name__}: {e}"
    finish(capsys, "reactivity", ok, detail)


# -- the committed transcript replays exactly ---------------------------------------


def _terminal_multiset(payload: bytes):
    out = collections.Counter()
    for line in payload.splitlines():
        m = json.loads(line)
        if m.get("type") == "status" and m["state"] in (
            "finished",
            "failed",
            "cancelled",
        ):
            out[(m["version"], m["span"], m["state"])] += 1
    return out


def _replay(workers: int) -> bytes:
    proc = subprocess.run(
        [
            sys.executable,
            "-m",
            "proofstream.cli",
            "replay",
            str(GOLDEN / "script.ndjson"),
            "--workers",
            str(workers),
        ],
        capture_output=True,
        timeout=300,
        cwd=ROOT,
    )
    if proc.returncode != 0:
        raise RuntimeError(f"replay failed: {proc.stderr.decode()[-200:]}")
    return proc.stdout


def test_golden_transcript_replay(capsys):
    ok, detail = False, "did not run"
    try:
        want = (GOLDEN / "transcript.w1.ndjson").read_bytes()
        got1 = _replay(1)
        got4 = _replay(4)
        byte_equal = got1 == want
        multiset_equal = _terminal_multiset(got4) == _terminal_multiset(want)
        ok = byte_equal and multiset_equal
        detail = (
            f"30-message script: 1-worker output byte-identical: {byte_equal}; "
            f"4-worker terminal-status multiset identical: {multiset_equal}"
        )
    except Exception as e:
        detail = f"crashed: {type(e).__name__}: {e}"
    finish(capsys, "golden transcript", ok, detail)


# -- comment-only edits cost nothing -------------------------------------------------


def _comment_noise(text: str, rng: random.Random) -> str:
    lines = [f"(* head {rng.randint(0, 999)} *)"]
    for line in text.split("\n"):
        if rng.random() < 0.5:
            lines.append(f"(* noise {rng.randint(0, 999)} *)")
        if rng.random() < 0.4:
            line = f"(* inline (* nested *) *) {line}"
        lines.append(line)
    return "\n".join(lines)


def test_comment_only_edit_is_free(capsys):
    ok, detail = False, "did not run"
    try:
        rng = random.Random(7)
        nonempty_diffs = 0
        for _ in range(25):
            text = random_corpus_doc(rng)
            variant = _comment_noise(text, rng)
            doc = init_document(text, IdAllocator())
            if diff_full_text(doc, variant):
                nonempty_diffs += 1

        # engine level: the comment edit must install with zero executions
        # and keep every span id
        task_leaks = 0
        for _ in range(5):
            text = random_corpus_doc(rng)
            col = Collector()
            with Engine(1, emit=col) as eng:
                eng.handle_client(
                    {"type": "full_text", "new_version": 1, "text": text}
                )
                if not eng.wait_quiescent(60):
                    raise RuntimeError("initial check never went quiescent")
                ids1 = [s["id"] for s in wait_for(col, assigned(1))["spans"]]
                eng.handle_client(
                    {
                        "type": "full_text",
                        "new_version": 2,
                        "text": _comment_noise(text, rng),
                    }
                )
                if not eng.wait_quiescent(60):
                    raise RuntimeError("comment edit never went quiescent")
                ids2 = [s["id"] for s in wait_for(col, assigned(2))["spans"]]
                if eng.counters() != (0, 0) or ids1 != ids2:
                    task_leaks += 1
        ok = nonempty_diffs == 0 and task_leaks == 0
        detail = (
            f"25 documents: {nonempty_diffs} non-empty diffs (want 0); "
            f"5 engine runs: {task_leaks} with tasks or id churn (want 0)"
        )
    except Exception as e:
        detail = f"crashed: {type(e).__name__}: {e}"
    finish(capsys, "comment immunity", ok, detail)


# -- the browser client works against a live server ---------------------------------


def _free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def test_frontend_scripted_session(capsys):
    ok, detail = False, "did not run"
    server = None
    try:
        frontend = ROOT / "frontend"
        if not (frontend / "node_modules").exists():
            install = subprocess.run(
                ["npm", "install", "--no-audit", "--no-fund"],
                cwd=frontend,
                capture_output=True,
                text=True,
                timeout=600,
            )
            if install.returncode != 0:
                raise RuntimeError(
                    f"npm install failed: {install.stderr.strip()[-200:]}"
                )
        if not (frontend / "dist-node" / "model.js").exists():
            build = subprocess.run(
                ["npm", "run", "-s", "build:node"],
                cwd=frontend,
                capture_output=True,
                text=True,
                timeout=600,
            )
            if build.returncode != 0:
                raise RuntimeError(f"build failed: {build.stderr.strip()[-300:]}")

        port = _free_port()
        server = subprocess.Popen(
            [
                sys.executable,
                "-m",
                "proofstream.cli",
                "serve",
                "--port",
                str(port),
            ],
            cwd=ROOT,
            stdout=subprocess.DEVNULL,
            stderr=subprocess.DEVNULL,
        )
        deadline = time.monotonic() + 10.0
        while True:
            try:
                socket.create_connection(("127.0.0.1", port), timeout=1).close()
                break
            except OSError:
                if time.monotonic() > deadline:
                    raise RuntimeError("server never came up")
                time.sleep(0.05)

        run = subprocess.run(
            ["node", "scripts/acceptance.mjs", str(port)],
            cwd=frontend,
            capture_output=True,
            text=True,
            timeout=180,
        )
        tail = (run.stdout.strip().splitlines() or ["no output"])[-1]
        ok = run.returncode == 0
        detail = (
            f"scripted editor session over tcp: {tail}"
            if ok
            else f"exit {run.returncode}: {run.stderr.strip()[-300:] or tail}"
        )
    except Exception as e:
        detail = f"crashed: {type(e).__name__}: {e}"
    finally:
        if server is not None:
            server.terminate()
            server.wait(timeout=10)
    finish(capsys, "frontend session", ok, detail)
