"""Command line front door: check, serve, replay, bench."""

from __future__ import annotations

import asyncio
import json
import os
import sys
import time
from typing import Optional

import click

from .engine import Engine
from .service.messages import encode
from .service.transports import EngineHub, serve_stdio, serve_tcp
from .syntax import pretty
from .tactics import dn_statement

QUIET_TIMEOUT = 600.0  # bound on any single wait, seconds


@click.group()
def main() -> None:
    """Incremental proof-document checking engine."""


# -- check ------------------------------------------------------------------


def _status_line(position: int, span, status) -> str:
    head = f"span {position:3d} [{status.state:9s}] {span.text.raw}"
    notes = "".join(
        f"\n        {m.severity}: {m.text} (offset {m.offset})"
        for m in status.messages
    )
    return head + notes


@main.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--workers", default=1, type=click.IntRange(min=1), show_default=True)
@click.option("--json", "as_json", is_flag=True, help="machine-readable report")
def check(file: str, workers: int, as_json: bool) -> None:
    """Batch-check FILE and report per-span statuses.

    Exits 0 when every span finished and every lemma proved, 1 when
    anything failed, 2 on I/O or usage errors.
    """
    try:
        with open(file, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise click.ClickException(str(e)) from e

    t0 = time.monotonic()
    eng = Engine(workers)
    eng.start()
    try:
        eng.handle_client({"type": "full_text", "new_version": 1, "text": text})
        if not eng.wait_quiescent(QUIET_TIMEOUT):
            raise click.ClickException("engine did not reach quiescence")
        doc = eng.document()
        statuses = eng.snapshot_statuses()
        verdicts = eng.snapshot_verdicts()
        plan = eng.current_plan()
    finally:
        eng.shutdown()
    wall_ms = int((time.monotonic() - t0) * 1000)

    lemmas = {r.name: verdicts.get(r.header_span_id, "failed") for r in plan.regions}
    all_done = all(statuses[s.span_id].state == "finished" for s in doc.spans)
    all_proved = all(v == "proved" for v in lemmas.values())
    code = 0 if all_done and all_proved else 1

    if as_json:
        report = {
            "file": file,
            "workers": workers,
            "wall_ms": wall_ms,
            "exit": code,
            "spans": [
                {
                    "id": s.span_id,
                    "text": s.text.raw,
                    "state": statuses[s.span_id].state,
                    "messages": [
                        {"severity": m.severity, "text": m.text, "offset": m.offset}
                        for m in statuses[s.span_id].messages
                    ],
                }
                for s in doc.spans
            ],
            "lemmas": lemmas,
        }
        click.echo(json.dumps(report, sort_keys=True))
    else:
        for i, s in enumerate(doc.spans):
            click.echo(_status_line(i, s, statuses[s.span_id]))
        bad = sum(1 for s in doc.spans if statuses[s.span_id].state != "finished")
        click.echo(
            f"checked {len(doc.spans)} spans in {wall_ms} ms with "
            f"{workers} worker(s): "
            + ("all good" if code == 0 else f"{bad} span(s) not finished")
        )
    sys.exit(code)


# -- serve -------------------------------------------------------------------


@main.command()
@click.option("--stdio", "use_stdio", is_flag=True, help="NDJSON over stdio")
@click.option("--port", type=int, default=None, help="NDJSON over TCP on this port")
@click.option("--ws-port", type=int, default=None, help="WebSocket + IDE on this port")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--workers", default=1, type=click.IntRange(min=1), show_default=True)
def serve(
    use_stdio: bool,
    port: Optional[int],
    ws_port: Optional[int],
    host: str,
    workers: int,
) -> None:
    """Run the engine behind one or more transports.

    With no transport flags, serves NDJSON over stdio. The session ends
    when stdio reaches EOF or receives a shutdown message; socket
    transports run until interrupted.
    """
    if use_stdio and port is not None:
        raise click.UsageError("--stdio and --port are mutually exclusive")
    if not use_stdio and port is None and ws_port is None:
        use_stdio = True

    hub = EngineHub(workers).start()

    async def run() -> None:
        tasks = []
        if use_stdio:
            tasks.append(asyncio.ensure_future(serve_stdio(hub)))
        if port is not None:
            tasks.append(asyncio.ensure_future(serve_tcp(hub, host, port)))
        if ws_port is not None:
            import uvicorn

            from .service.app import create_app

            config = uvicorn.Config(
                create_app(hub), host=host, port=ws_port, log_level="warning"
            )
            tasks.append(asyncio.ensure_future(uvicorn.Server(config).serve()))
        done, pending = await asyncio.wait(
            tasks, return_when=asyncio.FIRST_COMPLETED
        )
        for t in pending:
            t.cancel()
        for t in done:
            t.result()  # surface crashes

    try:
        asyncio.run(run())
    except KeyboardInterrupt:
        pass
    finally:
        hub.shutdown()


# -- replay ------------------------------------------------------------------


@main.command()
@click.argument("script", type=click.Path(exists=True, dir_okay=False))
@click.option("--workers", default=1, type=click.IntRange(min=1), show_default=True)
def replay(script: str, workers: int) -> None:
    """Feed SCRIPT (NDJSON client messages) to the engine and print every
    server message to stdout in arrival order.

    Control lines {"type":"wait_quiescent"} block until the engine drains;
    with --workers 1 the output is deterministic byte for byte.
    """

    def emit(message: dict) -> None:  # coordinator thread; sole stdout writer
        sys.stdout.write(encode(message) + "\n")
        sys.stdout.flush()

    eng = Engine(workers, emit=emit)
    eng.start()
    try:
        with open(script, "r", encoding="utf-8") as fh:
            for raw in fh:
                line = raw.strip()
                if not line:
                    continue
                try:
                    message = json.loads(line)
                except ValueError:
                    eng.handle_client(
                        {"type": "_transport_error", "reason": "invalid json"}
                    )
                    continue
                if not isinstance(message, dict):
                    eng.handle_client(
                        {
                            "type": "_transport_error",
                            "reason": "message must be a json object",
                        }
                    )
                    continue
                if message.get("type") == "wait_quiescent":
                    if not eng.wait_quiescent(QUIET_TIMEOUT):
                        raise click.ClickException("wait_quiescent timed out")
                    continue
                eng.handle_client(message)
        if not eng.wait_quiescent(QUIET_TIMEOUT):
            raise click.ClickException("engine did not reach quiescence")
    finally:
        eng.shutdown()
    sys.exit(0)


# -- bench ------------------------------------------------------------------


def bench_document(lemmas: int, neg: int) -> str:
    """K independent lemmas of the dn family, one atom each, proved by
    search at their exact minimum depth (2*neg + 2)."""
    depth = 2 * neg + 2
    parts = []
    for i in range(lemmas):
        statement = pretty(dn_statement(neg, f"p{i}"))
        parts.append(
            f"lemma bench{i} : {statement}. proof. search {depth}. qed."
        )
    return "\n".join(parts)


@main.command()
@click.option("--lemmas", default=8, type=click.IntRange(min=1), show_default=True)
@click.option("--neg", default=5, type=click.IntRange(min=1), show_default=True)
@click.option("--workers", default=1, type=click.IntRange(min=1), show_default=True)
@click.option("--json", "as_json", is_flag=True)
def bench(lemmas: int, neg: int, workers: int, as_json: bool) -> None:
    """Generate K search-proved lemmas and measure checking cost."""
    text = bench_document(lemmas, neg)
    cpu0 = os.times()
    t0 = time.monotonic()
    eng = Engine(workers)
    eng.start()
    try:
        eng.handle_client({"type": "full_text", "new_version": 1, "text": text})
        if not eng.wait_quiescent(QUIET_TIMEOUT):
            raise click.ClickException("bench did not reach quiescence")
        verdicts = eng.snapshot_verdicts()
    finally:
        eng.shutdown()  # joins workers, so children cpu time is counted
    wall_ms = int((time.monotonic() - t0) * 1000)
    cpu1 = os.times()
    cpu_ms = int(
        (
            (cpu1.user - cpu0.user)
            + (cpu1.system - cpu0.system)
            + (cpu1.children_user - cpu0.children_user)
            + (cpu1.children_system - cpu0.children_system)
        )
        * 1000
    )

    if any(v != "proved" for v in verdicts.values()) or len(verdicts) != lemmas:
        raise click.ClickException("bench lemmas did not all prove")

    report = {
        "workers": workers,
        "lemmas": lemmas,
        "wall_ms": wall_ms,
        "cpu_ms": cpu_ms,
    }
    if as_json:
        click.echo(json.dumps(report, sort_keys=True))
    else:
        click.echo(
            f"{lemmas} lemmas (neg={neg}) on {workers} worker(s): "
            f"wall {wall_ms} ms, cpu {cpu_ms} ms"
        )


if __name__ == "__main__":
    main()
