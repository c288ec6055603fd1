import asyncio
import json
import time
import zlib

import pytest

from livegate.frames import (EndOfStream, InvalidSpec, ManifestUnreadable,
                             ReplaySource, SourceSpec, SyntheticSource,
                             open_source, parse_source_arg, synthetic_pattern)

from .conftest import write_recording

pytestmark = pytest.mark.anyio


# -- synthetic patterns -------------------------------------------------------

def test_static_ignores_seq():
    frames = [synthetic_pattern("static", 64, 64, s) for s in (0, 1, 7, 1000)]
    assert all(f == frames[0] for f in frames)


def test_moving_gradient_period_is_width():
    a = synthetic_pattern("moving-gradient", 16, 4, 3)
    b = synthetic_pattern("moving-gradient", 16, 4, 3 + 16)
    assert a == b


def test_moving_gradient_consecutive_frames_differ():
    a = synthetic_pattern("moving-gradient", 16, 4, 0)
    b = synthetic_pattern("moving-gradient", 16, 4, 1)
    assert a != b


def test_moving_gradient_quantization_4x1():
    # ramp value at column c is floor(255*c/4); seq 0 means no shift
    assert synthetic_pattern("moving-gradient", 4, 1, 0) == bytes([0, 63, 127, 191])


def test_moving_gradient_shift_by_one():
    # one frame later the ramp is shifted by one column
    assert synthetic_pattern("moving-gradient", 4, 1, 1) == bytes([63, 127, 191, 0])


def test_noise_deterministic_per_seq():
    assert synthetic_pattern("noise", 8, 8, 5) == synthetic_pattern("noise", 8, 8, 5)
    assert synthetic_pattern("noise", 8, 8, 5) != synthetic_pattern("noise", 8, 8, 6)


def test_pattern_rejects_bad_dims():
    with pytest.raises(InvalidSpec):
        synthetic_pattern("static", 0, 4, 0)


# -- spec parsing -------------------------------------------------------------

def test_parse_source_arg_variants():
    dev = parse_source_arg("device:2")
    assert dev.kind == "device" and dev.device_id == 2

    rep = parse_source_arg("replay:/tmp/rec@2.0")
    assert rep.kind == "replay" and rep.manifest_path == "/tmp/rec"
    assert rep.replay_speed == 2.0

    rep_plain = parse_source_arg("replay:/tmp/rec")
    assert rep_plain.replay_speed == 1.0

    syn = parse_source_arg("synthetic:moving-gradient:640x480@10")
    assert (syn.kind, syn.pattern, syn.width, syn.height, syn.fps) == \
        ("synthetic", "moving-gradient", 640, 480, 10.0)


@pytest.mark.parametrize("bad", [
    "garbage:1", "synthetic:nosuch:64x64@10", "synthetic:static:0x64@10",
    "synthetic:static:64x64@0", "device:x",
])
def test_parse_source_arg_rejects(bad):
    with pytest.raises(InvalidSpec):
        parse_source_arg(bad)


def test_spec_roundtrip():
    spec = parse_source_arg("synthetic:noise:32x16@25")
    assert SourceSpec.from_dict(spec.to_dict()) == spec


# -- synthetic source ---------------------------------------------------------

async def test_synthetic_seq_starts_at_zero_and_increments():
    src = SyntheticSource(SourceSpec(kind="synthetic", pattern="static",
                                     width=8, height=8, fps=1000))
    f0 = await src.next_frame()
    f1 = await src.next_frame()
    assert (f0.seq, f1.seq) == (0, 1)
    assert f1.t_capture_ns >= f0.t_capture_ns
    assert f0.pixel_format == "GRAY8" and len(f0.payload) == 64


async def test_synthetic_pacing():
    src = open_source(SourceSpec(kind="synthetic", pattern="static",
                                 width=8, height=8, fps=50))
    stamps = [(await src.next_frame()).t_capture_ns for _ in range(6)]
    gaps_ms = [(b - a) / 1e6 for a, b in zip(stamps, stamps[1:])]
    # 50 fps -> 20 ms nominal; generous slack for scheduler jitter
    assert 12 < sum(gaps_ms) / len(gaps_ms) < 35


# -- replay source ------------------------------------------------------------

def make_rec(tmp_path, payloads, **kw):
    return write_recording(tmp_path / "session0", payloads, **kw)


async def test_replay_yields_exact_frames_then_end(tmp_path):
    payloads = [synthetic_pattern("noise", 8, 8, i) for i in range(10)]
    rec_dir = make_rec(tmp_path, payloads)
    src = open_source(SourceSpec(kind="replay", manifest_path=str(rec_dir)))
    got = []
    while True:
        try:
            got.append(await src.next_frame())
        except EndOfStream:
            break
    assert [f.payload for f in got] == payloads
    assert [f.seq for f in got] == list(range(10))


async def test_replay_speed_halves_intervals(tmp_path):
    # recorded at 10 fps (100 ms apart), replayed at 2.0x -> ~50 ms apart
    payloads = [synthetic_pattern("noise", 8, 8, i) for i in range(6)]
    rec_dir = make_rec(tmp_path, payloads, fps=10.0)
    src = ReplaySource(SourceSpec(kind="replay", manifest_path=str(rec_dir),
                                  replay_speed=2.0))
    stamps = []
    for _ in range(6):
        stamps.append((await src.next_frame()).t_capture_ns)
    gaps_ms = [(b - a) / 1e6 for a, b in zip(stamps, stamps[1:])]
    mean_gap = sum(gaps_ms) / len(gaps_ms)
    assert 40 < mean_gap < 75, f"expected ~50 ms spacing, got {mean_gap:.1f} ms"


async def test_replay_restamps_capture_clock(tmp_path):
    rec_dir = make_rec(tmp_path, [bytes(64)])
    src = ReplaySource(SourceSpec(kind="replay", manifest_path=str(rec_dir)))
    frame = await src.next_frame()
    # fresh monotonic stamp, not the recorded 1970-ish value
    assert abs(frame.t_capture_ns - time.monotonic_ns()) < 5e9


def test_replay_unreadable_manifest(tmp_path):
    with pytest.raises(ManifestUnreadable):
        ReplaySource(SourceSpec(kind="replay", manifest_path=str(tmp_path / "nope")))


def test_open_source_validates():
    with pytest.raises(InvalidSpec):
        open_source(SourceSpec(kind="synthetic", pattern="static", width=8,
                               height=8, fps=-1))
