"""FastAPI service: the 75 Hz simulation loop, a WebSocket control/telemetry
channel at /ws, a small REST surface under /api, and the UI's static assets.

Physics runs at the fixed frame rate; state is broadcast at a third of that.
Slow clients never stall the loop: each client is always handed the latest
tick and intermediate ones are dropped.
"""

from __future__ import annotations

import asyncio
import json
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import ValidationError

from ..geometry import SimConfig
from ..persistence import Scenario, scenario_to_dict
from .protocol import PROTOCOL_VERSION, ClientEnvelope, ErrorReply
from .session import LiveSession

BROADCAST_EVERY = 3  # physics frames per broadcast (75 Hz -> 25 Hz)


class _Broadcaster:
    """Latest-state mailbox: every publish replaces the previous tick."""

    def __init__(self) -> None:
        self.seq = 0
        self.payload: str | None = None
        self.extra: list[str] = []
        self._cond = asyncio.Condition()

    async def publish(self, payload: str, extra: list[str]) -> None:
        async with self._cond:
            self.seq += 1
            self.payload = payload
            self.extra.extend(extra)
            self._cond.notify_all()

    async def wait_newer(self, seen: int) -> tuple[int, str | None, list[str]]:
        async with self._cond:
            await self._cond.wait_for(lambda: self.seq > seen)
            extra, self.extra = self.extra, []
            return self.seq, self.payload, extra


def create_app(
    scenario: Scenario,
    config: SimConfig | None = None,
    *,
    static_dir: str | Path | None = None,
    time_scale: float = 1.0,
    recordings_dir: str | Path = "recordings",
) -> FastAPI:
    """Build the service around one authoritative session.

    time_scale > 1 runs the loop faster than wall time (the physics step is
    unchanged); 0 means no pacing at all. Both are for tests.
    """
    session = LiveSession(scenario, config, recordings_dir=recordings_dir)
    broadcaster = _Broadcaster()

    async def loop() -> None:
        dt_wall = session.engine.config.dt / time_scale if time_scale > 0 else 0.0
        clock = asyncio.get_running_loop().time
        deadline = clock()
        frame = 0
        while True:
            session.pump()
            session.step_frame()
            frame += 1
            if frame % BROADCAST_EVERY == 0:
                extra = [n.model_dump_json() for n in session.drain_notices()]
                await broadcaster.publish(session.tick().model_dump_json(), extra)
            deadline += dt_wall
            delay = deadline - clock()
            if delay > 0:
                await asyncio.sleep(delay)
            else:
                deadline = clock()
                await asyncio.sleep(0)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        task = asyncio.create_task(loop())
        try:
            yield
        finally:
            task.cancel()
            try:
                await task
            except asyncio.CancelledError:
                pass
            session._stop_recording()

    app = FastAPI(title="proxsim service", lifespan=lifespan)
    app.state.session = session

    @app.get("/api/health")
    def health() -> dict:
        return {"status": "ok", "protocol": PROTOCOL_VERSION, "t": session.t}

    @app.get("/api/scenario")
    def current_scenario() -> JSONResponse:
        return JSONResponse(scenario_to_dict(session._current_scenario()))

    @app.get("/api/state")
    def current_state() -> JSONResponse:
        return JSONResponse(json.loads(session.tick().model_dump_json()))

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket) -> None:
        await ws.accept()
        await ws.send_text(session.tick().model_dump_json())
        send_lock = asyncio.Lock()

        async def sender() -> None:
            seen = 0
            while True:
                seen, payload, extra = await broadcaster.wait_newer(seen)
                async with send_lock:
                    for notice in extra:
                        await ws.send_text(notice)
                    if payload is not None:
                        await ws.send_text(payload)

        send_task = asyncio.create_task(sender())
        try:
            while True:
                raw = await ws.receive_text()
                reply = await _handle_message(raw)
                if reply is not None:
                    async with send_lock:
                        await ws.send_text(reply)
        except WebSocketDisconnect:
            pass
        finally:
            send_task.cancel()
            try:
                await send_task
            except asyncio.CancelledError:
                pass

    async def _handle_message(raw: str) -> str | None:
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as e:
            return ErrorReply(message=f"invalid JSON: {e}").model_dump_json()
        try:
            envelope = ClientEnvelope(message=data)
        except ValidationError as e:
            first = e.errors()[0]
            where = ".".join(str(p) for p in first["loc"][1:])
            return ErrorReply(message=f"invalid message ({where}): {first['msg']}").model_dump_json()
        fut: asyncio.Future = asyncio.get_running_loop().create_future()
        session.enqueue(envelope.message, lambda reply: fut.set_result(reply))
        reply = await fut
        return reply.model_dump_json()

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
