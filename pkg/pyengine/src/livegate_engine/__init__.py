"""Wrap an arbitrary predict function as a livegate inference engine.

The whole contract is the wire protocol (docs/engine-protocol.md in the
gateway repo): a WebSocket, one descriptor JSON, then binary requests in and
JSON replies out. Nothing here imports gateway code; a standard image decoder
and a WebSocket client are the only dependencies.

predict_fn takes an image array (HxW uint8 for grayscale, HxWx3 for color)
and returns {"verdict": ..., "plane": ..., "concepts": [...]}. Exceptions are
reported as error replies; the engine stays up.
"""

from __future__ import annotations

import asyncio
import io
import json
import struct
import time

import numpy as np
from PIL import Image
from websockets.asyncio.client import connect

__version__ = "0.1.0"

CONNECT_RETRIES = 25
CONNECT_RETRY_DELAY_S = 0.2


def decode_wireframe(data: bytes):
    """WireFrame bytes -> (header dict, image array)."""
    if data[:4] != b"LGF1":
        raise ValueError("bad magic, expected LGF1")
    (header_len,) = struct.unpack(">I", data[4:8])
    header = json.loads(data[8:8 + header_len].decode("utf-8"))
    payload = data[8 + header_len:]
    w, h = header["width"], header["height"]
    fmt = header["pixel_format"]
    if fmt == "GRAY8":
        image = np.frombuffer(payload, np.uint8).reshape(h, w)
    elif fmt == "RGB8":
        image = np.frombuffer(payload, np.uint8).reshape(h, w, 3)
    elif fmt == "JPEG":
        image = np.asarray(Image.open(io.BytesIO(payload)).convert("RGB"))
    else:
        raise ValueError(f"unknown pixel_format {fmt!r}")
    return header, image


def parse_infer_request(data: bytes):
    """Binary request -> (request_id, upstream dict or None, WireFrame bytes)."""
    request_id, upstream_len = struct.unpack(">II", data[:8])
    upstream = json.loads(data[8:8 + upstream_len]) if upstream_len else None
    return request_id, upstream, data[8 + upstream_len:]


def _reply_for(predict_fn, request_id: int, frame_seq: int, image) -> dict:
    t0 = time.monotonic()
    try:
        out = predict_fn(image)
        reply = {
            "request_id": request_id,
            "frame_seq": frame_seq,
            "verdict": out.get("verdict", "unknown_plane"),
            "plane": out.get("plane", "other"),
            "concepts": out.get("concepts", []),
        }
    except Exception as exc:  # research code; survive anything it throws
        reply = {
            "request_id": request_id,
            "frame_seq": frame_seq,
            "verdict": "unknown_plane",
            "plane": "other",
            "concepts": [],
            "error": f"{type(exc).__name__}: {exc}",
        }
    reply["engine_ms"] = (time.monotonic() - t0) * 1000.0
    return reply


async def serve(predict_fn, name: str, gateway_addr: str,
                stage_role: str = "classification") -> None:
    """Connect, register, answer infer requests until the gateway goes away."""
    last_exc = None
    for _ in range(CONNECT_RETRIES):
        try:
            ws = await connect(gateway_addr, max_size=None)
            break
        except OSError as exc:
            last_exc = exc
            await asyncio.sleep(CONNECT_RETRY_DELAY_S)
    else:
        raise ConnectionError(f"cannot reach {gateway_addr}: {last_exc}")

    async with ws:
        await ws.send(json.dumps({"name": name, "version": __version__,
                                  "accepts": ["GRAY8", "RGB8", "JPEG"],
                                  "stage_role": stage_role, "max_concurrent": 1}))
        ack = json.loads(await ws.recv())
        if ack.get("type") != "registered":
            raise ConnectionError(f"registration rejected: {ack}")
        async for message in ws:
            if not isinstance(message, bytes):
                continue
            request_id, _, frame_bytes = parse_infer_request(message)
            header, image = decode_wireframe(frame_bytes)
            reply = _reply_for(predict_fn, request_id, header["seq"], image)
            await ws.send(json.dumps(reply))
