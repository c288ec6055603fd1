"""HTTP/WebSocket surface of the gateway.

  ws /frames?mode=reliable|latest   WireFrame binary stream (default latest)
  ws /results                       PredictionResult JSON stream, latest-wins,
                                    snapshot of the most recent result on connect
  ws /engine                        engine registration + infer traffic
  GET /healthz                      component health JSON
  GET /                             viewer bundle when present, status page otherwise
"""

from __future__ import annotations

import asyncio
import json
import logging
from pathlib import Path
from typing import Callable, Optional

import aiohttp
from aiohttp import web

from . import bus as busmod
from . import engine_protocol as proto
from . import wire
from .gateway import EngineConn, EngineRegistry

log = logging.getLogger(__name__)

_FALLBACK_PAGE = """<!doctype html>
<html><head><title>livegate</title></head>
<body><h1>livegate gateway</h1>
<p>No viewer bundle installed. Endpoints: <code>/frames</code>,
<code>/results</code>, <code>/engine</code>, <code>/healthz</code>.</p>
</body></html>
"""


class FrameServer:
    def __init__(self, frame_bus: busmod.Bus, result_hub: busmod.Bus,
                 registry: EngineRegistry, host: str = "127.0.0.1", port: int = 8780,
                 viewer_dir: Optional[str | Path] = None,
                 recorder_status: Callable[[], str] = lambda: "off"):
        self._frame_bus = frame_bus
        self._result_hub = result_hub
        self._registry = registry
        self.host = host
        self.port = port
        self._viewer_dir = Path(viewer_dir) if viewer_dir else None
        self._recorder_status = recorder_status
        self._runner: Optional[web.AppRunner] = None

    def build_app(self) -> web.Application:
        app = web.Application()
        app.router.add_get("/frames", self._frames_ws)
        app.router.add_get("/results", self._results_ws)
        app.router.add_get("/engine", self._engine_ws)
        app.router.add_get("/healthz", self._healthz)
        app.router.add_get("/", self._index)
        app.router.add_get("/{asset}", self._asset)
        return app

    async def start(self) -> None:
        self._runner = web.AppRunner(self.build_app())
        await self._runner.setup()
        site = web.TCPSite(self._runner, self.host, self.port)
        await site.start()
        # port 0 means "pick one"; report what the OS actually gave us
        self.port = site._server.sockets[0].getsockname()[1]
        log.info("gateway listening on %s:%d", self.host, self.port)

    async def stop(self) -> None:
        if self._runner is not None:
            await self._runner.cleanup()
            self._runner = None

    # -- frame / result fan-out ------------------------------------------

    async def _frames_ws(self, request: web.Request) -> web.WebSocketResponse:
        mode = request.query.get("mode", busmod.LATEST)
        if mode not in (busmod.RELIABLE, busmod.LATEST):
            raise web.HTTPBadRequest(text=f"unknown mode {mode!r}")
        sub = self._frame_bus.subscribe(mode)
        return await self._stream(request, sub, self._frame_bus,
                                  lambda ws, f: ws.send_bytes(wire.encode_frame(f)))

    async def _results_ws(self, request: web.Request) -> web.WebSocketResponse:
        sub = self._result_hub.subscribe(busmod.LATEST, snapshot=True)
        return await self._stream(request, sub, self._result_hub,
                                  lambda ws, r: ws.send_str(json.dumps(r)))

    async def _stream(self, request, sub, bus, send_one) -> web.WebSocketResponse:
        ws = web.WebSocketResponse(heartbeat=30)
        await ws.prepare(request)

        async def pump():
            while True:
                item = await sub.recv()
                await send_one(ws, item)

        pump_task = asyncio.create_task(pump())
        drain_task = asyncio.create_task(self._drain(ws))  # notices client close
        done, pending = await asyncio.wait({pump_task, drain_task},
                                           return_when=asyncio.FIRST_COMPLETED)
        for task in pending:
            task.cancel()
        bus.unsubscribe(sub)
        if pump_task in done:
            exc = pump_task.exception()
            if exc is None or isinstance(exc, busmod.Closed):
                await ws.close()
            elif isinstance(exc, busmod.Overflow):
                await ws.close(code=aiohttp.WSCloseCode.INTERNAL_ERROR,
                               message=str(exc).encode())
            elif isinstance(exc, (ConnectionError, aiohttp.ClientError)):
                pass  # client went away mid-send
            else:
                log.exception("stream handler failed", exc_info=exc)
                await ws.close(code=aiohttp.WSCloseCode.INTERNAL_ERROR)
        return ws

    @staticmethod
    async def _drain(ws: web.WebSocketResponse) -> None:
        # we never expect client messages on these streams, but reading is
        # what processes pings and close frames
        async for _ in ws:
            pass

    # -- engine side ------------------------------------------------------

    async def _engine_ws(self, request: web.Request) -> web.WebSocketResponse:
        ws = web.WebSocketResponse(heartbeat=30)
        await ws.prepare(request)
        msg = await ws.receive()
        if msg.type != aiohttp.WSMsgType.TEXT:
            await ws.send_str(proto.rejection("MalformedDescriptor",
                                              "first message must be a descriptor JSON text"))
            await ws.close()
            return ws
        try:
            descriptor = proto.parse_descriptor(msg.data)
        except proto.MalformedDescriptor as exc:
            await ws.send_str(proto.rejection("MalformedDescriptor", str(exc)))
            await ws.close()
            return ws

        conn = EngineConn(descriptor, ws.send_bytes)
        try:
            self._registry.register(conn)
        except proto.DuplicateName:
            await ws.send_str(proto.rejection("DuplicateName", descriptor.name))
            await ws.close()
            return ws

        await ws.send_str(proto.registered_ack(descriptor.name))
        log.info("engine %s registered (%s)", descriptor.name, descriptor.stage_role)
        try:
            async for msg in ws:
                if msg.type == aiohttp.WSMsgType.TEXT:
                    conn.on_reply(msg.data)
        finally:
            self._registry.unregister(conn)
            log.info("engine %s disconnected", descriptor.name)
        return ws

    # -- plumbing ----------------------------------------------------------

    async def _healthz(self, request: web.Request) -> web.Response:
        return web.json_response({
            "bus": "closed" if self._frame_bus.closed else "ok",
            "engines": self._registry.health(),
            "recorder": self._recorder_status(),
        })

    async def _index(self, request: web.Request) -> web.Response:
        if self._viewer_dir is not None:
            index = self._viewer_dir / "index.html"
            if index.exists():
                return web.FileResponse(index)
        return web.Response(text=_FALLBACK_PAGE, content_type="text/html")

    async def _asset(self, request: web.Request) -> web.Response:
        if self._viewer_dir is None:
            raise web.HTTPNotFound
        root = self._viewer_dir.resolve()
        target = (root / request.match_info["asset"]).resolve()
        if root not in target.parents or not target.is_file():
            raise web.HTTPNotFound
        return web.FileResponse(target)
