"""HTTP surface: health endpoint, WebSocket protocol, static IDE files.

WebSocket text frames carry exactly the NDJSON payloads, one message per
frame, so golden transcripts and tests are shared across transports.
"""

from __future__ import annotations

import asyncio
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .messages import decode_client_line, encode
from .transports import BUSY, EngineHub


class HealthResponse(BaseModel):
    status: str
    version: int
    workers: int


def find_frontend_dist() -> Optional[Path]:
    """Locate the built IDE, if any: next to the repository sources or
    under the current directory."""
    here = Path(__file__).resolve()
    candidates = [
        here.parents[3] / "frontend" / "dist",
        Path.cwd() / "frontend" / "dist",
    ]
    for c in candidates:
        if (c / "index.html").is_file():
            return c
    return None


def create_app(hub: EngineHub, static_dir: Optional[Path] = None) -> FastAPI:
    app = FastAPI(title="proofstream", docs_url=None, redoc_url=None)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(
            status="ok",
            version=hub.engine.document().version,
            workers=hub.engine.scheduler.workers,
        )

    @app.websocket("/ws")
    async def ws(websocket: WebSocket) -> None:
        await websocket.accept()
        loop = asyncio.get_running_loop()
        outq: "asyncio.Queue[Optional[str]]" = asyncio.Queue()

        def send(message: dict) -> None:  # coordinator thread
            try:
                loop.call_soon_threadsafe(outq.put_nowait, encode(message))
            except RuntimeError:
                pass  # loop already closed; the client is gone

        if not hub.attach(send):
            await websocket.send_text(encode(BUSY))
            await websocket.close()
            return

        async def pump() -> None:
            while True:
                line = await outq.get()
                if line is None:
                    return
                try:
                    await websocket.send_text(line)
                except Exception:
                    return

        pump_task = asyncio.ensure_future(pump())
        for message in hub.snapshot_messages():
            outq.put_nowait(encode(message))

        draining = False
        try:
            while True:
                try:
                    frame = await websocket.receive_text()
                except WebSocketDisconnect:
                    break
                message, err = decode_client_line(frame)
                if err is not None:
                    hub.engine.handle_client(
                        {"type": "_transport_error", "reason": err}
                    )
                    continue
                if message.get("type") == "shutdown":
                    draining = True
                    break
                hub.engine.handle_client(message)
        finally:
            if draining:
                await asyncio.to_thread(hub.engine.wait_quiescent, 30)
                await asyncio.sleep(0.05)
            hub.detach(send)
            outq.put_nowait(None)
            await pump_task
            try:
                await websocket.close()
            except Exception:
                pass

    static = static_dir if static_dir is not None else find_frontend_dist()
    if static is not None:
        app.mount("/", StaticFiles(directory=str(static), html=True), name="ide")
    return app
