"""Deterministic stand-in for a real inference engine.

Serves scripted results round-robin, with optional scripted failure. Runs
in-process (tests, bench) or as `python -m livegate.mock_engine` under the
supervisor. Reported engine_ms is the scripted delay, not a measurement, so
identical scripts and request sequences produce byte-identical reply
sequences.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Optional

import aiohttp

from . import engine_protocol as proto
from . import wire

log = logging.getLogger(__name__)

DEFAULT_SCRIPT = [{
    "verdict": "standard_plane",
    "plane": "head",
    "concepts": [
        {"name": "skull", "present": True, "score": 0.97},
        {"name": "midline", "present": True, "score": 0.92},
    ],
    "delay_ms": 0,
}]

CONNECT_RETRIES = 25
CONNECT_RETRY_DELAY_S = 0.2


@dataclass(slots=True)
class MockBehavior:
    script: list[dict] = field(default_factory=lambda: [dict(e) for e in DEFAULT_SCRIPT])
    failure_mode: str = "none"  # none | crash_after_n | hang
    failure_n: int = 0

    def __post_init__(self):
        if self.failure_mode not in ("none", "crash_after_n", "hang"):
            raise ValueError(f"unknown failure_mode {self.failure_mode!r}")
        for entry in self.script:
            if entry.get("delay_ms", 0) < 0:
                raise ValueError("delay_ms must be >= 0")


async def run_mock_engine(behavior: MockBehavior, gateway_addr: str,
                          name: str = "mock-1", stage_role: str = "classification",
                          hard_exit: bool = False,
                          ready: Optional[asyncio.Event] = None) -> None:
    """Connect, handshake, serve infer requests per script until the
    connection drops or a scripted crash fires.

    hard_exit: crash with os._exit(1) instead of returning, so a supervised
    process actually dies the way a broken research container would.
    """
    descriptor = proto.EngineDescriptor(name=name, stage_role=stage_role)
    async with aiohttp.ClientSession() as session:
        ws = await _connect(session, gateway_addr)
        try:
            await ws.send_str(json.dumps(descriptor.to_dict()))
            ack = json.loads((await ws.receive_str()))
            if ack.get("type") != "registered":
                raise proto.DuplicateName(ack.get("error", "registration rejected"))
            if ready is not None:
                ready.set()
            await _serve(ws, behavior, hard_exit)
        finally:
            await ws.close()


async def _connect(session: aiohttp.ClientSession, gateway_addr: str):
    last_exc: Optional[Exception] = None
    for _ in range(CONNECT_RETRIES):
        try:
            return await session.ws_connect(gateway_addr)
        except aiohttp.ClientError as exc:
            last_exc = exc
            await asyncio.sleep(CONNECT_RETRY_DELAY_S)
    raise proto.GatewayUnreachable(f"cannot reach {gateway_addr}: {last_exc}")


async def _serve(ws, behavior: MockBehavior, hard_exit: bool) -> None:
    served = 0
    while True:
        msg = await ws.receive()
        if msg.type != aiohttp.WSMsgType.BINARY:
            if msg.type in (aiohttp.WSMsgType.CLOSE, aiohttp.WSMsgType.CLOSING,
                            aiohttp.WSMsgType.CLOSED, aiohttp.WSMsgType.ERROR):
                return
            continue
        request_id, upstream, frame_bytes = proto.decode_infer_request(msg.data)
        frame = wire.decode_frame(frame_bytes)

        if behavior.failure_mode == "crash_after_n" and served >= behavior.failure_n:
            log.info("scripted crash after %d requests", served)
            if hard_exit:
                os._exit(1)
            return
        if behavior.failure_mode == "hang":
            continue  # swallow the request, stay connected

        entry = behavior.script[served % len(behavior.script)]
        delay_ms = entry.get("delay_ms", 0)
        if delay_ms:
            await asyncio.sleep(delay_ms / 1000.0)
        served += 1
        await ws.send_str(proto.build_reply(
            request_id=request_id,
            frame_seq=frame.seq,
            verdict=entry.get("verdict", "unknown_plane"),
            plane=entry.get("plane", "other"),
            concepts=entry.get("concepts", []),
            engine_ms=float(delay_ms),
            upstream_seen=upstream is not None,
        ))


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="livegate.mock_engine")
    parser.add_argument("--gateway", required=True, help="ws://host:port/engine")
    parser.add_argument("--name", default="mock-1")
    parser.add_argument("--stage-role", default="classification")
    parser.add_argument("--script", default=None, help="JSON list of script entries")
    parser.add_argument("--failure-mode", default="none",
                        choices=["none", "crash_after_n", "hang"])
    parser.add_argument("--failure-n", type=int, default=0)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s")

    behavior = MockBehavior(
        script=json.loads(args.script) if args.script else [dict(e) for e in DEFAULT_SCRIPT],
        failure_mode=args.failure_mode,
        failure_n=args.failure_n,
    )
    try:
        asyncio.run(run_mock_engine(behavior, args.gateway, name=args.name,
                                    stage_role=args.stage_role, hard_exit=True))
    except KeyboardInterrupt:
        pass
    except proto.GatewayUnreachable as exc:
        log.error("%s", exc)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
