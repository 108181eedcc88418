"""Transports: NDJSON over stdio and TCP, plus the connection hub.

The engine is single-client: exactly one connection across all transports
owns the document at a time. A newcomer while one is attached gets a
protocol_error and is closed. On attach, the hub replays a snapshot
(current assigned spans plus their statuses) so a reconnecting client can
pick up an engine that already holds state.

Outbound messages are produced on the engine's coordinator thread; each
connection bridges them into its event loop with call_soon_threadsafe and
a single writer task, so lines never interleave.
"""

from __future__ import annotations

import asyncio
import sys
import threading
from typing import Callable, List, Optional

from ..engine import Engine
from .messages import decode_client_line, encode

Sender = Callable[[dict], None]


class EngineHub:
    """One engine, at most one attached client, snapshot on attach."""

    def __init__(self, workers: int = 1):
        self.engine = Engine(workers, emit=self._dispatch)
        self._mutex = threading.Lock()
        self._send: Optional[Sender] = None

    def start(self) -> "EngineHub":
        self.engine.start()
        return self

    def shutdown(self) -> None:
        self.engine.shutdown()

    def _dispatch(self, message: dict) -> None:
        with self._mutex:
            send = self._send
        if send is not None:
            send(message)

    def attach(self, send: Sender) -> bool:
        with self._mutex:
            if self._send is not None:
                return False
            self._send = send
            return True

    def detach(self, send: Sender) -> None:
        with self._mutex:
            if self._send is send:
                self._send = None

    @property
    def attached(self) -> bool:
        with self._mutex:
            return self._send is not None

    def snapshot_messages(self) -> List[dict]:
        """What a freshly attached client needs to catch up: the current
        version's spans and every status known so far. Version 0 is the
        pristine engine; it has no statuses by construction."""
        doc = self.engine.document()
        statuses = self.engine.snapshot_statuses()
        out: List[dict] = [
            {
                "type": "assigned",
                "version": doc.version,
                "spans": [{"id": s.span_id, "text": s.text.raw} for s in doc.spans],
            }
        ]
        for s in doc.spans:
            st = statuses.get(s.span_id)
            if st is None:
                continue
            out.append(
                {
                    "type": "status",
                    "version": doc.version,
                    "span": s.span_id,
                    "state": st.state,
                    "messages": [
                        {"severity": m.severity, "text": m.text, "offset": m.offset}
                        for m in st.messages
                    ],
                }
            )
        if doc.version > 0 and self.engine.wait_quiescent(0):
            out.append(
                {"type": "progress", "version": doc.version, "state": "quiescent"}
            )
        return out


BUSY = {"type": "protocol_error", "reason": "another client owns the session"}


async def ndjson_session(
    hub: EngineHub,
    reader: asyncio.StreamReader,
    writer: asyncio.StreamWriter,
) -> None:
    """Run one NDJSON connection until EOF or a shutdown message."""
    loop = asyncio.get_running_loop()
    outq: "asyncio.Queue[Optional[str]]" = asyncio.Queue()

    def send(message: dict) -> None:  # called from the coordinator thread
        try:
            loop.call_soon_threadsafe(outq.put_nowait, encode(message))
        except RuntimeError:
            pass  # loop already closed; the client is gone

    if not hub.attach(send):
        writer.write((encode(BUSY) + "\n").encode("utf-8"))
        try:
            await writer.drain()
            writer.close()
        except (ConnectionError, OSError):
            pass
        return

    async def pump() -> None:
        while True:
            line = await outq.get()
            if line is None:
                return
            try:
                writer.write((line + "\n").encode("utf-8"))
                await writer.drain()
            except (ConnectionError, OSError):
                return

    pump_task = asyncio.ensure_future(pump())
    for message in hub.snapshot_messages():
        outq.put_nowait(encode(message))

    draining = False
    try:
        while True:
            raw = await reader.readline()
            if not raw:
                break
            line = raw.decode("utf-8", errors="replace").strip()
            if not line:
                continue
            message, err = decode_client_line(line)
            if err is not None:
                hub.engine.handle_client({"type": "_transport_error", "reason": err})
                continue
            if message.get("type") == "shutdown":
                draining = True
                break
            hub.engine.handle_client(message)
    finally:
        if draining:
            await asyncio.to_thread(hub.engine.wait_quiescent, 30)
            await asyncio.sleep(0.05)  # let queued emissions cross the loop
        hub.detach(send)
        outq.put_nowait(None)
        await pump_task
        try:
            writer.close()
        except (ConnectionError, OSError):
            pass


async def start_tcp(hub: EngineHub, host: str, port: int) -> asyncio.AbstractServer:
    return await asyncio.start_server(
        lambda r, w: ndjson_session(hub, r, w), host, port
    )


async def serve_tcp(hub: EngineHub, host: str, port: int) -> None:
    server = await start_tcp(hub, host, port)
    async with server:
        await server.serve_forever()


async def serve_stdio(hub: EngineHub) -> None:
    loop = asyncio.get_running_loop()
    reader = asyncio.StreamReader()
    await loop.connect_read_pipe(
        lambda: asyncio.StreamReaderProtocol(reader), sys.stdin
    )
    transport, protocol = await loop.connect_write_pipe(
        asyncio.streams.FlowControlMixin, sys.stdout
    )
    writer = asyncio.StreamWriter(transport, protocol, None, loop)
    await ndjson_session(hub, reader, writer)
