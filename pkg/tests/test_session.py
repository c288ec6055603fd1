import asyncio
import json
import socket
import sys

import pytest

from livegate.bus import RELIABLE, Closed
from livegate.config import SessionConfig
from livegate.frames import SourceSpec, synthetic_pattern
from livegate.gateway import PipelineConfig
from livegate.recorder import verify_recording
from livegate.session import Session
from livegate.supervisor import ChildSpec

from .conftest import write_recording

pytestmark = pytest.mark.anyio


def mock_child(name="mock-1", extra=()):
    return ChildSpec(
        name=name,
        command=[sys.executable, "-m", "livegate.mock_engine",
                 "--gateway", "{gateway}", "--name", name, *extra],
    )


async def test_end_to_end_replay_session(tmp_path):
    # 100-frame recording at 10 fps, replayed at 4x (~2.5 s of session)
    payloads = [synthetic_pattern("noise", 8, 8, i) for i in range(100)]
    rec_dir = write_recording(tmp_path / "rec", payloads, fps=10.0)

    cfg = SessionConfig(
        source=SourceSpec(kind="replay", manifest_path=str(rec_dir), replay_speed=4.0),
        bind_port=0,
        record=True,
        output_dir=str(tmp_path / "out"),
        pipeline=PipelineConfig(stages=["mock-1"]),
        engines=[mock_child()],
    )
    session = Session(cfg)
    results_sub = session.result_hub.subscribe(RELIABLE, capacity=4096)
    code = await session.run()
    assert code == 0

    assert session.manifest is not None
    assert session.manifest["frame_count"] == 100
    assert session.manifest["complete"] is True
    assert verify_recording(session.recording.dir).ok

    # the hub is closed by session.stop, so the reliable sub drains then ends
    collected = []
    try:
        while True:
            collected.append(await results_sub.recv())
    except Closed:
        pass
    assert sum(1 for r in collected if r["status"] == "ok") >= 1


async def test_interrupt_finalizes_recording(tmp_path):
    cfg = SessionConfig(
        source=SourceSpec(kind="synthetic", pattern="noise", width=8, height=8, fps=100),
        bind_port=0,
        record=True,
        output_dir=str(tmp_path),
        pipeline=PipelineConfig(stages=["ext"]),
        external_engines=["ext"],  # nobody connects; markers are fine
    )
    session = Session(cfg)

    async def interrupter():
        await asyncio.sleep(0.4)
        session.interrupt()

    task = asyncio.create_task(interrupter())
    code = await session.run()
    await task
    assert code == 0
    assert session.manifest["complete"] is True
    assert session.manifest["frame_count"] >= 10
    assert session.manifest["frame_count"] == session.frames_published
    assert verify_recording(session.recording.dir).ok


async def test_max_frames_ends_session():
    cfg = SessionConfig(
        source=SourceSpec(kind="synthetic", pattern="static", width=8, height=8, fps=500),
        bind_port=0,
        pipeline=PipelineConfig(stages=["ext"]),
        external_engines=["ext"],
    )
    session = Session(cfg, max_frames=10)
    code = await session.run()
    assert code == 0
    assert session.frames_published == 10


async def test_bound_port_fails_cleanly():
    blocker = socket.socket()
    blocker.bind(("127.0.0.1", 0))
    blocker.listen(1)
    port = blocker.getsockname()[1]
    try:
        cfg = SessionConfig(
            source=SourceSpec(kind="synthetic", pattern="static", width=8, height=8, fps=10),
            bind_port=port,
            pipeline=PipelineConfig(stages=["ext"]),
            external_engines=["ext"],
        )
        code = await Session(cfg).run()
        assert code == 1
    finally:
        blocker.close()


async def test_healthz_reflects_session_recorder(tmp_path):
    import aiohttp

    cfg = SessionConfig(
        source=SourceSpec(kind="synthetic", pattern="static", width=8, height=8, fps=50),
        bind_port=0,
        record=True,
        output_dir=str(tmp_path),
        pipeline=PipelineConfig(stages=["ext"]),
        external_engines=["ext"],
    )
    session = Session(cfg)
    await session.start()
    try:
        async with aiohttp.ClientSession() as http:
            url = f"http://127.0.0.1:{session.server.port}/healthz"
            async with http.get(url) as resp:
                body = await resp.json()
        assert body["recorder"] == "ok"
        assert body["bus"] == "ok"
    finally:
        await session.stop()
