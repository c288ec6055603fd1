"""Capture sources: live device, recorded-session replay, synthetic generators.

Everything downstream of this module (bus, recorder, gateway) only ever sees
the Frame type; device APIs never leak out. A source is owned and polled by
exactly one reader.
"""

from __future__ import annotations

import asyncio
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

PIXEL_FORMATS = ("GRAY8", "RGB8", "JPEG")
PATTERNS = ("static", "moving-gradient", "noise")

JPEG_QUALITY = 85

# Guesses, not contract: scanners rarely advertise their HDMI format and the
# capture box renegotiates anyway. Override via SourceSpec / config.
DEFAULT_DEVICE_WIDTH = 1920
DEFAULT_DEVICE_HEIGHT = 1080
DEFAULT_DEVICE_FPS = 30.0


class InvalidSpec(ValueError):
    pass


class DeviceNotFound(RuntimeError):
    pass


class ManifestUnreadable(RuntimeError):
    pass


class SourceFailed(RuntimeError):
    """Device unplugged / decode failure. Distinct from normal end of stream."""


class EndOfStream(Exception):
    """Clean termination of a finite source. A signal, not an error."""


def payload_len(pixel_format: str, width: int, height: int) -> Optional[int]:
    """Exact payload size for raw formats; None for JPEG (variable)."""
    if pixel_format == "GRAY8":
        return width * height
    if pixel_format == "RGB8":
        return 3 * width * height
    return None


@dataclass(slots=True)
class Frame:
    seq: int
    t_capture_ns: int  # monotonic clock; latency math only
    t_wall_ns: int  # wall clock; human-readable manifests only
    width: int
    height: int
    pixel_format: str
    payload: bytes

    def validate(self) -> None:
        if self.pixel_format not in PIXEL_FORMATS:
            raise InvalidSpec(f"unknown pixel_format {self.pixel_format!r}")
        if self.width < 1 or self.height < 1:
            raise InvalidSpec("width and height must be >= 1")
        expected = payload_len(self.pixel_format, self.width, self.height)
        if expected is not None and len(self.payload) != expected:
            raise InvalidSpec(
                f"payload length {len(self.payload)} != {expected} "
                f"for {self.pixel_format} {self.width}x{self.height}"
            )


@dataclass(slots=True)
class SourceSpec:
    kind: str  # device | replay | synthetic
    device_id: Optional[int] = None
    manifest_path: Optional[str] = None
    pattern: Optional[str] = None
    width: int = DEFAULT_DEVICE_WIDTH
    height: int = DEFAULT_DEVICE_HEIGHT
    fps: float = DEFAULT_DEVICE_FPS
    replay_speed: float = 1.0

    def validate(self) -> None:
        if self.kind == "device":
            if self.device_id is None or self.device_id < 0:
                raise InvalidSpec("device source needs a non-negative device_id")
        elif self.kind == "replay":
            if not self.manifest_path:
                raise InvalidSpec("replay source needs a manifest_path")
            if self.replay_speed <= 0:
                raise InvalidSpec("replay_speed must be > 0")
        elif self.kind == "synthetic":
            if self.pattern not in PATTERNS:
                raise InvalidSpec(f"pattern must be one of {PATTERNS}")
            if self.width < 1 or self.height < 1:
                raise InvalidSpec("width and height must be >= 1")
            if self.fps <= 0:
                raise InvalidSpec("fps must be > 0")
        else:
            raise InvalidSpec(f"unknown source kind {self.kind!r}")

    def to_dict(self) -> dict:
        if self.kind == "device":
            return {"kind": "device", "device_id": self.device_id,
                    "width": self.width, "height": self.height, "fps": self.fps}
        if self.kind == "replay":
            return {"kind": "replay", "manifest_path": self.manifest_path,
                    "replay_speed": self.replay_speed}
        return {"kind": "synthetic", "pattern": self.pattern,
                "width": self.width, "height": self.height, "fps": self.fps}

    @classmethod
    def from_dict(cls, data: dict) -> "SourceSpec":
        spec = cls(
            kind=data.get("kind", ""),
            device_id=data.get("device_id"),
            manifest_path=data.get("manifest_path"),
            pattern=data.get("pattern"),
            width=int(data.get("width", DEFAULT_DEVICE_WIDTH)),
            height=int(data.get("height", DEFAULT_DEVICE_HEIGHT)),
            fps=float(data.get("fps", DEFAULT_DEVICE_FPS)),
            replay_speed=float(data.get("replay_speed", 1.0)),
        )
        spec.validate()
        return spec


def parse_source_arg(text: str) -> SourceSpec:
    """Parse the CLI selector syntax.

    device:<id> | replay:<manifest-path>[@<speed>] | synthetic:<pattern>:<W>x<H>@<fps>
    """
    kind, _, rest = text.partition(":")
    try:
        if kind == "device":
            spec = SourceSpec(kind="device", device_id=int(rest))
        elif kind == "replay":
            path, at, speed = rest.rpartition("@")
            if at and _is_number(speed):
                spec = SourceSpec(kind="replay", manifest_path=path, replay_speed=float(speed))
            else:
                spec = SourceSpec(kind="replay", manifest_path=rest)
        elif kind == "synthetic":
            pattern, _, geom = rest.partition(":")
            dims, _, fps = geom.partition("@")
            w, _, h = dims.partition("x")
            spec = SourceSpec(kind="synthetic", pattern=pattern,
                              width=int(w), height=int(h), fps=float(fps))
        else:
            raise InvalidSpec(f"unknown source kind {kind!r}")
    except (ValueError, TypeError) as exc:
        if isinstance(exc, InvalidSpec):
            raise
        raise InvalidSpec(f"cannot parse source {text!r}: {exc}") from exc
    spec.validate()
    return spec


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def synthetic_pattern(pattern: str, width: int, height: int, seq: int) -> bytes:
    """Deterministic GRAY8 test payload; pure function of its arguments.

    static: horizontal quantized ramp, identical for every seq.
    moving-gradient: the same ramp shifted by (seq mod width) columns.
    noise: uniform bytes from a generator seeded with seq.
    """
    if width < 1 or height < 1:
        raise InvalidSpec("width and height must be >= 1")
    if pattern == "noise":
        rng = np.random.default_rng(seq)
        return rng.integers(0, 256, size=width * height, dtype=np.uint8).tobytes()
    if pattern in ("static", "moving-gradient"):
        shift = (seq % width) if pattern == "moving-gradient" else 0
        ramp = (255 * np.arange(width, dtype=np.int64)) // width
        row = ramp[(np.arange(width) + shift) % width].astype(np.uint8)
        return np.tile(row, height).tobytes()
    raise InvalidSpec(f"unknown pattern {pattern!r}")


def _stamp() -> tuple[int, int]:
    return time.monotonic_ns(), time.time_ns()


class FrameSource:
    """Base: an async iterator of Frames. next_frame() blocks at source pacing."""

    async def next_frame(self) -> Frame:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def __aiter__(self):
        return self

    async def __anext__(self) -> Frame:
        try:
            return await self.next_frame()
        except EndOfStream:
            raise StopAsyncIteration


class SyntheticSource(FrameSource):
    """Infinite generated stream at a fixed rate; deadline-paced to avoid drift."""

    def __init__(self, spec: SourceSpec):
        self.spec = spec
        self._seq = 0
        self._interval = 1.0 / spec.fps
        self._next_due: Optional[float] = None

    async def next_frame(self) -> Frame:
        now = time.monotonic()
        if self._next_due is None:
            self._next_due = now
        delay = self._next_due - now
        if delay > 0:
            await asyncio.sleep(delay)
        self._next_due += self._interval
        payload = synthetic_pattern(self.spec.pattern, self.spec.width, self.spec.height, self._seq)
        t_cap, t_wall = _stamp()
        frame = Frame(self._seq, t_cap, t_wall, self.spec.width, self.spec.height, "GRAY8", payload)
        self._seq += 1
        return frame


class ReplaySource(FrameSource):
    """Replays a recording session byte-identically, paced by the original
    capture timestamps divided by replay_speed. Finite: raises EndOfStream."""

    def __init__(self, spec: SourceSpec):
        self.spec = spec
        manifest_path = Path(spec.manifest_path)
        if manifest_path.is_dir():
            manifest_path = manifest_path / "manifest.json"
        try:
            manifest = json.loads(manifest_path.read_text())
            self._container = (manifest_path.parent / manifest["container_file"]).open("rb")
        except (OSError, ValueError, KeyError) as exc:
            raise ManifestUnreadable(f"cannot read recording at {spec.manifest_path}: {exc}") from exc
        self._records = manifest["frames"]
        self._idx = 0
        self._prev_orig_ns: Optional[int] = None

    async def next_frame(self) -> Frame:
        if self._idx >= len(self._records):
            self.close()
            raise EndOfStream
        rec = self._records[self._idx]
        if self._prev_orig_ns is not None:
            gap_s = (rec["t_capture_ns"] - self._prev_orig_ns) / 1e9 / self.spec.replay_speed
            if gap_s > 0:
                await asyncio.sleep(gap_s)
        self._prev_orig_ns = rec["t_capture_ns"]
        self._container.seek(rec["byte_offset"])
        payload = self._container.read(rec["byte_len"])
        if len(payload) != rec["byte_len"]:
            raise SourceFailed(f"container truncated at seq {rec['seq']}")
        t_cap, t_wall = _stamp()
        frame = Frame(self._idx, t_cap, t_wall, rec["width"], rec["height"],
                      rec["pixel_format"], payload)
        self._idx += 1
        return frame

    def close(self) -> None:
        if not self._container.closed:
            self._container.close()


class DeviceSource(FrameSource):
    """Live capture through the platform camera API (the HDMI-to-USB box shows
    up as a plain webcam). Frames go out as JPEG to bound wire bandwidth."""

    def __init__(self, spec: SourceSpec):
        import cv2  # local import: keeps headless test envs off the device path

        self.spec = spec
        self._cv2 = cv2
        self._cap = cv2.VideoCapture(spec.device_id)
        if not self._cap.isOpened():
            self._cap.release()
            raise DeviceNotFound(f"no capture device {spec.device_id}")
        self._cap.set(cv2.CAP_PROP_FRAME_WIDTH, spec.width)
        self._cap.set(cv2.CAP_PROP_FRAME_HEIGHT, spec.height)
        self._cap.set(cv2.CAP_PROP_FPS, spec.fps)
        self._seq = 0

    async def next_frame(self) -> Frame:
        loop = asyncio.get_running_loop()
        ok, bgr = await loop.run_in_executor(None, self._cap.read)
        if not ok:
            raise SourceFailed(f"device {self.spec.device_id} read failed")
        t_cap, t_wall = _stamp()
        ok, buf = self._cv2.imencode(
            ".jpg", bgr, [self._cv2.IMWRITE_JPEG_QUALITY, JPEG_QUALITY])
        if not ok:
            raise SourceFailed("JPEG encode failed")
        h, w = bgr.shape[:2]
        frame = Frame(self._seq, t_cap, t_wall, w, h, "JPEG", buf.tobytes())
        self._seq += 1
        return frame

    def close(self) -> None:
        self._cap.release()


def open_source(spec: SourceSpec) -> FrameSource:
    spec.validate()
    if spec.kind == "synthetic":
        return SyntheticSource(spec)
    if spec.kind == "replay":
        return ReplaySource(spec)
    return DeviceSource(spec)
