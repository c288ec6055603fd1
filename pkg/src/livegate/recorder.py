"""Lossless parallel recording of the broadcast stream.

Layout on disk: <output_dir>/<session_id>/frames.lgr (payloads concatenated
back to back, no per-frame framing) plus manifest.json indexing every frame
by offset, length and crc32. Raw payloads rather than a video container keep
replay bit-exact; transcode to mp4 for human viewing happens outside this
tool (ffmpeg on frames.lgr + manifest does it).

The recorder rides its own reliable subscription, so engine or gateway
failures never touch it. If its queue ever overflows the recording is marked
incomplete in the manifest instead of silently losing frames.
"""

from __future__ import annotations

import asyncio
import json
import time
import uuid
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import bus as busmod
from .frames import SourceSpec

MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.json"
CONTAINER_NAME = "frames.lgr"


class AlreadyFinalized(RuntimeError):
    pass


class ManifestMissing(FileNotFoundError):
    pass


class ContainerMissing(FileNotFoundError):
    pass


@dataclass(slots=True)
class VerifyReport:
    ok: bool
    frame_count: int
    first_bad_seq: Optional[int] = None
    detail: str = ""


class RecordingHandle:
    """One active recording session. Create via start_recording()."""

    def __init__(self, bus: busmod.Bus, output_dir: str | Path,
                 source_spec: Optional[SourceSpec] = None):
        self.session_id = str(uuid.uuid4())
        self.dir = Path(output_dir) / self.session_id
        self.dir.mkdir(parents=True, exist_ok=True)
        self._container = (self.dir / CONTAINER_NAME).open("wb")
        self._bus = bus
        self._sub = bus.subscribe(busmod.RELIABLE, capacity=busmod.DEFAULT_CAPACITY)
        self._source_spec = source_spec
        self._records: list[dict] = []
        self._created_wall_ns = time.time_ns()
        self._complete = True
        self._finalized = False
        self._task = asyncio.get_running_loop().create_task(self._run())

    @property
    def frame_count(self) -> int:
        return len(self._records)

    async def _run(self) -> None:
        offset = 0
        try:
            while True:
                frame = await self._sub.recv()
                self._container.write(frame.payload)
                self._records.append({
                    "seq": frame.seq,
                    "t_capture_ns": frame.t_capture_ns,
                    "t_wall_ns": frame.t_wall_ns,
                    "width": frame.width,
                    "height": frame.height,
                    "pixel_format": frame.pixel_format,
                    "byte_offset": offset,
                    "byte_len": len(frame.payload),
                    "crc32": zlib.crc32(frame.payload),
                })
                offset += len(frame.payload)
        except busmod.Closed:
            pass
        except busmod.Overflow:
            self._complete = False

    async def finalize(self) -> dict:
        """Flush, write manifest.json, return the manifest. Handle is dead after."""
        if self._finalized:
            raise AlreadyFinalized(f"recording {self.session_id} already finalized")
        self._finalized = True
        self._bus.unsubscribe(self._sub)  # writer drains the queue, then stops
        await self._task
        self._container.flush()
        self._container.close()
        manifest = {
            "manifest_version": MANIFEST_VERSION,
            "session_id": self.session_id,
            "created_wall": self._created_wall_ns,
            "source_spec": self._source_spec.to_dict() if self._source_spec else None,
            "complete": self._complete,
            "frame_count": len(self._records),
            "container_file": CONTAINER_NAME,
            "frames": self._records,
        }
        (self.dir / MANIFEST_NAME).write_text(json.dumps(manifest, indent=1))
        return manifest


def start_recording(bus: busmod.Bus, output_dir: str | Path,
                    source_spec: Optional[SourceSpec] = None) -> RecordingHandle:
    """Subscribe reliably and append every received frame until finalized.
    Must be called with an event loop running."""
    return RecordingHandle(bus, output_dir, source_spec)


def verify_recording(recording_dir: str | Path) -> VerifyReport:
    """Recompute every crc32 and offset bound; ok iff all pass and seqs are gapless."""
    recording_dir = Path(recording_dir)
    manifest_path = recording_dir / MANIFEST_NAME
    if not manifest_path.exists():
        raise ManifestMissing(str(manifest_path))
    manifest = json.loads(manifest_path.read_text())
    container_path = recording_dir / manifest["container_file"]
    if not container_path.exists():
        raise ContainerMissing(str(container_path))

    records = manifest["frames"]
    if manifest.get("frame_count") != len(records):
        return VerifyReport(False, len(records), None, "frame_count disagrees with index")
    size = container_path.stat().st_size
    prev_end = 0
    prev_seq: Optional[int] = None
    with container_path.open("rb") as container:
        for rec in records:
            seq = rec["seq"]
            if prev_seq is not None and seq != prev_seq + 1:
                return VerifyReport(False, len(records), seq, "sequence gap")
            prev_seq = seq
            if rec["byte_offset"] < prev_end or rec["byte_offset"] + rec["byte_len"] > size:
                return VerifyReport(False, len(records), seq, "offset out of bounds")
            prev_end = rec["byte_offset"] + rec["byte_len"]
            container.seek(rec["byte_offset"])
            payload = container.read(rec["byte_len"])
            if len(payload) != rec["byte_len"] or zlib.crc32(payload) != rec["crc32"]:
                return VerifyReport(False, len(records), seq, "crc mismatch")
    return VerifyReport(True, len(records))
