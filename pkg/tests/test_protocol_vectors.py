"""The committed byte-level vectors under testdata/protocol are the shared
conformance surface: the framework, any engine adapter and the viewer must all
agree on them."""

import json
from pathlib import Path

import pytest

from livegate import engine_protocol as proto
from livegate import wire
from livegate.frames import Frame

VECTORS = Path(__file__).resolve().parent.parent / "testdata" / "protocol"

WIREFRAME_NAMES = ["wireframe_gray8_2x2", "wireframe_rgb8_1x1",
                   "wireframe_gradient_16x16"]


@pytest.mark.parametrize("name", WIREFRAME_NAMES)
def test_wireframe_vectors_decode(name):
    blob = (VECTORS / f"{name}.bin").read_bytes()
    meta = json.loads((VECTORS / f"{name}.json").read_text())
    frame = wire.decode_frame(blob)
    assert frame.seq == meta["seq"]
    assert frame.t_capture_ns == meta["t_capture_ns"]
    assert frame.t_wall_ns == meta["t_wall_ns"]
    assert (frame.width, frame.height) == (meta["width"], meta["height"])
    assert frame.pixel_format == meta["pixel_format"]
    assert frame.payload.hex() == meta["payload_hex"]


@pytest.mark.parametrize("name", WIREFRAME_NAMES)
def test_wireframe_vectors_reencode_bit_exact(name):
    blob = (VECTORS / f"{name}.bin").read_bytes()
    assert wire.encode_frame(wire.decode_frame(blob)) == blob


def test_infer_request_vectors():
    meta = json.loads((VECTORS / "infer_requests.json").read_text())
    for name, expected in meta.items():
        blob = (VECTORS / f"{name}.bin").read_bytes()
        request_id, upstream, frame_bytes = proto.decode_infer_request(blob)
        assert request_id == expected["request_id"]
        assert upstream == expected["upstream"]
        assert frame_bytes == (VECTORS / f"{expected['frame']}.bin").read_bytes()


def test_descriptor_vector_parses():
    desc = proto.parse_descriptor((VECTORS / "descriptor_example.json").read_text())
    assert desc.name == "mock-1"
    assert desc.max_concurrent == 1


@pytest.mark.anyio
async def test_mock_engine_matches_reply_fixture():
    """Identical script + identical request sequence -> the exact committed replies."""
    import asyncio
    import time

    import aiohttp

    from livegate.bus import Bus
    from livegate.gateway import EngineRegistry, make_result_hub
    from livegate.mock_engine import MockBehavior, run_mock_engine
    from livegate.server import FrameServer

    fixture = json.loads((VECTORS / "mock_reply_sequence.json").read_text())
    registry = EngineRegistry()
    bus, hub = Bus(), make_result_hub()
    server = FrameServer(bus, hub, registry, port=0)
    await server.start()
    ready = asyncio.Event()
    task = asyncio.create_task(run_mock_engine(
        MockBehavior(script=fixture["script"]),
        f"ws://127.0.0.1:{server.port}/engine", name="mock-1", ready=ready))
    try:
        await asyncio.wait_for(ready.wait(), 5.0)
        conn = registry.get("mock-1")
        replies = []
        for seq in fixture["request_frame_seqs"]:
            frame = Frame(seq, 0, 0, 2, 2, "GRAY8", bytes(4))
            replies.append(await conn.infer(wire.encode_frame(frame), None, 2.0))
        assert replies == fixture["replies"]
    finally:
        task.cancel()
        await asyncio.gather(task, return_exceptions=True)
        bus.close()
        hub.close()
        await server.stop()
