"""Test-side gateway: a minimal server speaking the documented engine
protocol, built independently of the real gateway so the adapter is tested
against the spec'd bytes, not against shared code."""

import asyncio
import json
import struct

from websockets.asyncio.server import serve as ws_serve


def encode_wireframe(seq, width, height, pixel_format, payload,
                     t_capture_ns=0, t_wall_ns=0) -> bytes:
    header = json.dumps({
        "seq": seq, "t_capture_ns": t_capture_ns, "t_wall_ns": t_wall_ns,
        "width": width, "height": height, "pixel_format": pixel_format,
    }, separators=(",", ":")).encode()
    return b"LGF1" + struct.pack(">I", len(header)) + header + payload


def encode_request(request_id, frame_bytes, upstream=None) -> bytes:
    blob = b"" if upstream is None else json.dumps(upstream).encode()
    return struct.pack(">II", request_id, len(blob)) + blob + frame_bytes


class GatewaySim:
    """Accepts one engine, verifies the handshake, then lets the test drive
    request/reply exchanges."""

    def __init__(self):
        self.descriptor = None
        self.replies: list[dict] = []
        self._engine = None
        self._connected = asyncio.Event()
        self._server = None
        self.port = None

    async def __aenter__(self):
        self._server = await ws_serve(self._handler, "127.0.0.1", 0)
        self.port = self._server.sockets[0].getsockname()[1]
        return self

    async def __aexit__(self, *exc):
        self._server.close()
        await self._server.wait_closed()

    @property
    def url(self):
        return f"ws://127.0.0.1:{self.port}/engine"

    async def _handler(self, ws):
        self.descriptor = json.loads(await ws.recv())
        await ws.send(json.dumps({"type": "registered",
                                  "name": self.descriptor["name"]}))
        self._engine = ws
        self._connected.set()
        try:
            await ws.wait_closed()
        finally:
            self._engine = None

    async def wait_engine(self, timeout=5.0):
        await asyncio.wait_for(self._connected.wait(), timeout)

    async def infer(self, request_id, frame_bytes, upstream=None, timeout=5.0) -> dict:
        await self._engine.send(encode_request(request_id, frame_bytes, upstream))
        reply = json.loads(await asyncio.wait_for(self._engine.recv(), timeout))
        self.replies.append(reply)
        return reply
