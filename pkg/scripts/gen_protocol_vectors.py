"""Generate the shared byte-level protocol test vectors under testdata/.

Run from the repo root: python scripts/gen_protocol_vectors.py
The outputs are committed; primary tests, the Python engine adapter, and the
viewer all validate against the same files.
"""

import json
import time
from pathlib import Path

from livegate import engine_protocol as proto
from livegate import wire
from livegate.frames import Frame, synthetic_pattern
from livegate.gateway import make_marker, make_result

ROOT = Path(__file__).resolve().parent.parent
PROTO_DIR = ROOT / "testdata" / "protocol"
VIEWER_DIR = ROOT / "testdata" / "viewer"


def frame_gray() -> Frame:
    return Frame(seq=3, t_capture_ns=111_000_000, t_wall_ns=1_700_000_000_000_000_222,
                 width=2, height=2, pixel_format="GRAY8", payload=bytes([1, 2, 3, 4]))


def frame_rgb() -> Frame:
    return Frame(seq=0, t_capture_ns=0, t_wall_ns=0, width=1, height=1,
                 pixel_format="RGB8", payload=bytes([0x10, 0x20, 0x30]))


def frame_gradient() -> Frame:
    return Frame(seq=12, t_capture_ns=500_000_000, t_wall_ns=1_700_000_000_500_000_000,
                 width=16, height=16, pixel_format="GRAY8",
                 payload=synthetic_pattern("moving-gradient", 16, 16, 12))


def main() -> None:
    PROTO_DIR.mkdir(parents=True, exist_ok=True)
    VIEWER_DIR.mkdir(parents=True, exist_ok=True)

    frames = {
        "wireframe_gray8_2x2": frame_gray(),
        "wireframe_rgb8_1x1": frame_rgb(),
        "wireframe_gradient_16x16": frame_gradient(),
    }
    for name, frame in frames.items():
        (PROTO_DIR / f"{name}.bin").write_bytes(wire.encode_frame(frame))
        (PROTO_DIR / f"{name}.json").write_text(json.dumps({
            "seq": frame.seq, "t_capture_ns": frame.t_capture_ns,
            "t_wall_ns": frame.t_wall_ns, "width": frame.width,
            "height": frame.height, "pixel_format": frame.pixel_format,
            "payload_hex": frame.payload.hex(),
        }, indent=1))

    upstream = {"verdict": "standard_plane", "plane": "head",
                "concepts": [{"name": "skull", "present": True, "score": 0.97}]}
    req_plain = proto.encode_infer_request(1, wire.encode_frame(frame_gray()), None)
    req_up = proto.encode_infer_request(2, wire.encode_frame(frame_gradient()), upstream)
    (PROTO_DIR / "infer_request_plain.bin").write_bytes(req_plain)
    (PROTO_DIR / "infer_request_upstream.bin").write_bytes(req_up)
    (PROTO_DIR / "infer_requests.json").write_text(json.dumps({
        "infer_request_plain": {"request_id": 1, "upstream": None,
                                "frame": "wireframe_gray8_2x2"},
        "infer_request_upstream": {"request_id": 2, "upstream": upstream,
                                   "frame": "wireframe_gradient_16x16"},
    }, indent=1))

    # expected replies for the default one-entry mock script over 3 requests
    script_entry = {
        "verdict": "standard_plane", "plane": "head",
        "concepts": [{"name": "skull", "present": True, "score": 0.97},
                     {"name": "midline", "present": True, "score": 0.92}],
        "delay_ms": 0,
    }
    replies = []
    for i, seq in enumerate((10, 11, 12), start=1):
        replies.append(json.loads(proto.build_reply(
            request_id=i, frame_seq=seq, verdict=script_entry["verdict"],
            plane=script_entry["plane"], concepts=script_entry["concepts"],
            engine_ms=0.0, upstream_seen=False)))
    (PROTO_DIR / "mock_reply_sequence.json").write_text(json.dumps({
        "script": [script_entry],
        "request_frame_seqs": [10, 11, 12],
        "replies": replies,
    }, indent=1))

    (PROTO_DIR / "descriptor_example.json").write_text(json.dumps({
        "name": "mock-1", "version": "0", "accepts": ["GRAY8", "RGB8", "JPEG"],
        "stage_role": "classification", "max_concurrent": 1,
    }, indent=1))

    # viewer fixture: one of each display-relevant result shape
    t0 = 1_000_000_000
    frame = frame_gradient()
    ok_reply = {"verdict": "standard_plane", "plane": "head",
                "concepts": script_entry["concepts"], "engine_ms": 42.0}
    near_reply = {"verdict": "near_standard_plane", "plane": "abdomen",
                  "concepts": [{"name": "stomach", "present": True, "score": 0.81},
                               {"name": "umbilical_vein", "present": False, "score": 0.22}],
                  "engine_ms": 55.0}
    unknown_reply = {"verdict": "unknown_plane", "plane": "other",
                     "concepts": [], "engine_ms": 31.0}
    messages = [
        make_result(frame, "mock-1", ok_reply, t0, t0 + 50_000_000, frozen=False),
        make_result(frame, "mock-1", near_reply, t0, t0 + 60_000_000, frozen=False),
        make_result(frame, "mock-1", unknown_reply, t0, t0 + 40_000_000, frozen=True),
        make_marker(frame, "mock-1", "engine_unavailable",
                    "engine 'mock-1' not connected", t0, t0 + 1_000_000, frozen=False),
        make_marker(frame, "mock-1", "timeout", "mock-1 exceeded 2000 ms",
                    t0, t0 + 2_000_000_000, frozen=False),
    ]
    future = dict(messages[0])
    future["result_version"] = 2
    messages.append(future)
    (VIEWER_DIR / "results_fixture.json").write_text(json.dumps(messages, indent=1))
    (VIEWER_DIR / "frame_fixture.bin").write_bytes(wire.encode_frame(frame))

    print(f"vectors written under {PROTO_DIR} and {VIEWER_DIR}")


if __name__ == "__main__":
    main()
