"""Wire contract between the gateway and inference engines.

Engines dial OUT to ws://<gateway>/engine (so research code only ever needs a
WebSocket client, and remote engines behind NAT can still join), then:

  1. engine -> gateway   text: descriptor JSON
  2. gateway -> engine   text: {"type": "registered", "name": ...}
                         or {"type": "error", "error": ...} followed by close
  3. gateway -> engine   binary infer-request:
                           4 bytes  request_id, unsigned big-endian
                           4 bytes  upstream_len, unsigned big-endian
                           upstream_len bytes  prior-stage result JSON (empty
                                               for the first pipeline stage)
                           rest     WireFrame bytes (see wire.py)
     engine -> gateway   text: reply JSON echoing request_id and frame_seq

Anything that can read JSON and bytes can implement this; see
docs/engine-protocol.md for the byte-exact description and test vectors.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Optional

VERDICTS = ("standard_plane", "near_standard_plane", "unknown_plane")
PLANES = ("head", "abdomen", "femur", "other")


class MalformedDescriptor(ValueError):
    pass


class DuplicateName(ValueError):
    pass


class ConnectionLost(RuntimeError):
    pass


class GatewayUnreachable(ConnectionError):
    pass


@dataclass(slots=True)
class EngineDescriptor:
    name: str
    version: str = "0"
    accepts: list[str] = field(default_factory=lambda: ["GRAY8", "RGB8", "JPEG"])
    stage_role: str = ""
    max_concurrent: int = 1

    def to_dict(self) -> dict:
        return {"name": self.name, "version": self.version, "accepts": list(self.accepts),
                "stage_role": self.stage_role, "max_concurrent": self.max_concurrent}


def parse_descriptor(text: str | bytes) -> EngineDescriptor:
    try:
        data = json.loads(text)
    except (ValueError, UnicodeDecodeError) as exc:
        raise MalformedDescriptor(f"descriptor is not JSON: {exc}") from exc
    if not isinstance(data, dict) or not isinstance(data.get("name"), str) or not data["name"]:
        raise MalformedDescriptor("descriptor needs a non-empty string 'name'")
    accepts = data.get("accepts", ["GRAY8", "RGB8", "JPEG"])
    if not isinstance(accepts, list) or not accepts:
        raise MalformedDescriptor("'accepts' must be a non-empty list")
    max_concurrent = data.get("max_concurrent", 1)
    if not isinstance(max_concurrent, int) or max_concurrent < 1:
        raise MalformedDescriptor("'max_concurrent' must be an integer >= 1")
    return EngineDescriptor(
        name=data["name"],
        version=str(data.get("version", "0")),
        accepts=[str(a) for a in accepts],
        stage_role=str(data.get("stage_role", "")),
        max_concurrent=max_concurrent,
    )


def registered_ack(name: str) -> str:
    return json.dumps({"type": "registered", "name": name})


def rejection(error: str, detail: str = "") -> str:
    return json.dumps({"type": "error", "error": error, "detail": detail})


def encode_infer_request(request_id: int, frame_bytes: bytes,
                         upstream: Optional[dict] = None) -> bytes:
    upstream_json = b"" if upstream is None else json.dumps(
        upstream, separators=(",", ":")).encode("utf-8")
    return struct.pack(">II", request_id, len(upstream_json)) + upstream_json + frame_bytes


def decode_infer_request(data: bytes) -> tuple[int, Optional[dict], bytes]:
    """-> (request_id, upstream result or None, WireFrame bytes)."""
    if len(data) < 8:
        raise ValueError(f"infer request too short: {len(data)} bytes")
    request_id, upstream_len = struct.unpack(">II", data[:8])
    if len(data) < 8 + upstream_len:
        raise ValueError("infer request truncated in upstream section")
    upstream = None
    if upstream_len:
        upstream = json.loads(data[8 : 8 + upstream_len].decode("utf-8"))
    return request_id, upstream, data[8 + upstream_len :]


def build_reply(request_id: int, frame_seq: int, verdict: str, plane: str,
                concepts: list[dict], engine_ms: float,
                error: Optional[str] = None, **extra) -> str:
    reply = {
        "request_id": request_id,
        "frame_seq": frame_seq,
        "verdict": verdict,
        "plane": plane,
        "concepts": concepts,
        "engine_ms": engine_ms,
    }
    if error is not None:
        reply["error"] = error
    reply.update(extra)
    return json.dumps(reply)


def parse_reply(text: str | bytes) -> dict:
    reply = json.loads(text)
    if not isinstance(reply, dict) or not isinstance(reply.get("request_id"), int):
        raise ValueError("reply must be a JSON object with integer request_id")
    reply.setdefault("verdict", "unknown_plane")
    reply.setdefault("plane", "other")
    reply.setdefault("concepts", [])
    reply.setdefault("engine_ms", 0.0)
    if reply["verdict"] not in VERDICTS:
        raise ValueError(f"unknown verdict {reply['verdict']!r}")
    if reply["plane"] not in PLANES:
        raise ValueError(f"unknown plane {reply['plane']!r}")
    for concept in reply["concepts"]:
        score = concept.get("score", 0.0)
        if not 0.0 <= float(score) <= 1.0:
            raise ValueError(f"concept score {score} outside [0, 1]")
    return reply
