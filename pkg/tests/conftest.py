import json
import time
import zlib

import pytest

from livegate.frames import Frame, synthetic_pattern


@pytest.fixture
def anyio_backend():
    return "asyncio"


def write_recording(target_dir, payloads, fps=10.0, width=8, height=8,
                    pixel_format="GRAY8"):
    """Hand-built recording in the documented on-disk format, independent of
    recorder.py (so replay and verify tests have a second opinion)."""
    target_dir.mkdir(parents=True, exist_ok=True)
    container = target_dir / "frames.lgr"
    records, offset, blob = [], 0, b""
    t0 = 1_000_000_000
    for i, payload in enumerate(payloads):
        records.append({
            "seq": i,
            "t_capture_ns": t0 + int(i * 1e9 / fps),
            "t_wall_ns": 1_700_000_000_000_000_000 + int(i * 1e9 / fps),
            "width": width, "height": height, "pixel_format": pixel_format,
            "byte_offset": offset, "byte_len": len(payload),
            "crc32": zlib.crc32(payload),
        })
        offset += len(payload)
        blob += payload
    container.write_bytes(blob)
    (target_dir / "manifest.json").write_text(json.dumps({
        "manifest_version": 1, "session_id": target_dir.name, "created_wall": 0,
        "source_spec": None, "complete": True, "frame_count": len(payloads),
        "container_file": "frames.lgr", "frames": records,
    }))
    return target_dir


def make_frame(seq=0, width=4, height=4, pixel_format="GRAY8", payload=None,
               t_capture_ns=None, t_wall_ns=None) -> Frame:
    if payload is None:
        payload = synthetic_pattern("moving-gradient", width, height, seq)
        if pixel_format == "RGB8":
            payload = bytes(b for px in payload for b in (px, px, px))
    return Frame(
        seq=seq,
        t_capture_ns=t_capture_ns if t_capture_ns is not None else time.monotonic_ns(),
        t_wall_ns=t_wall_ns if t_wall_ns is not None else time.time_ns(),
        width=width,
        height=height,
        pixel_format=pixel_format,
        payload=payload,
    )
