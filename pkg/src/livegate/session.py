"""Composition root: wires source, bus, server, gateway loop, recorder and
supervised engines into one running session, and owns the shutdown order
(source, then gateway, then recorder finalize, then supervisor)."""

from __future__ import annotations

import asyncio
import logging
import time
from dataclasses import replace
from typing import Optional

from . import bus as busmod
from . import frames as framesmod
from .config import SessionConfig
from .gateway import EngineRegistry, PipelineLoop, make_result_hub
from .recorder import RecordingHandle, start_recording
from .server import FrameServer
from .supervisor import Supervisor

log = logging.getLogger(__name__)


class StackUnhealthy(RuntimeError):
    pass


class Session:
    """One live deployment. start() brings the stack up; run() additionally
    pumps the source to completion and tears everything down."""

    def __init__(self, config: SessionConfig, max_frames: Optional[int] = None,
                 publish_log: Optional[list] = None,
                 submission_log: Optional[list] = None,
                 logs_dir: Optional[str] = None):
        self.config = config
        self.max_frames = max_frames
        self.publish_log = publish_log  # (seq, t_publish_ns) when enabled
        self.frame_bus = busmod.Bus()
        self.result_hub = make_result_hub()
        self.registry = EngineRegistry()
        self.server = FrameServer(
            self.frame_bus, self.result_hub, self.registry,
            host=config.bind_host, port=config.bind_port,
            viewer_dir=config.viewer_dir,
            recorder_status=lambda: "ok" if self.recording else "off")
        self.supervisor = Supervisor(logs_dir=logs_dir)
        self.loop = PipelineLoop(self.frame_bus, self.result_hub, self.registry,
                                 config.pipeline, submission_log=submission_log)
        self.recording: Optional[RecordingHandle] = None
        self.manifest: Optional[dict] = None
        self.frames_published = 0
        self._source: Optional[framesmod.FrameSource] = None
        self._pump_task: Optional[asyncio.Task] = None
        self._stopped = False

    @property
    def gateway_url(self) -> str:
        return f"ws://{self.server.host}:{self.server.port}"

    async def start(self) -> None:
        self._source = framesmod.open_source(self.config.source)
        await self.server.start()
        if self.config.record:
            self.recording = start_recording(self.frame_bus, self.config.output_dir,
                                             source_spec=self.config.source)
        self.loop.start()
        for child in self.config.engines:
            spec = _substitute(child, self.gateway_url)
            await self.supervisor.spawn(spec)
        self._pump_task = asyncio.get_running_loop().create_task(self._pump())

    async def _pump(self) -> None:
        try:
            while True:
                if self.max_frames is not None and self.frames_published >= self.max_frames:
                    return
                frame = await self._source.next_frame()
                if self.publish_log is not None:
                    self.publish_log.append((frame.seq, time.monotonic_ns()))
                self.frame_bus.publish(frame)
                self.frames_published += 1
        except framesmod.EndOfStream:
            log.info("source ended after %d frames", self.frames_published)
        except framesmod.SourceFailed as exc:
            log.error("source failed: %s", exc)
            raise

    async def wait_for_engines(self, names: Optional[list[str]] = None,
                               timeout_s: float = 15.0) -> None:
        """Block until every pipeline stage has a connected engine."""
        names = names if names is not None else self.config.pipeline.stages
        deadline = time.monotonic() + timeout_s
        while time.monotonic() < deadline:
            if all(self.registry.get(n) is not None for n in names):
                return
            await asyncio.sleep(0.02)
        raise StackUnhealthy(f"engines not registered within {timeout_s}s: {names}")

    def interrupt(self) -> None:
        """Request a graceful end of session (signal-handler safe)."""
        if self._pump_task is not None and not self._pump_task.done():
            self._pump_task.cancel()

    async def wait_source_done(self) -> None:
        await self._pump_task

    async def stop(self) -> None:
        """Shutdown order: source, gateway loop, recorder finalize,
        supervisor, server. Idempotent."""
        if self._stopped:
            return
        self._stopped = True
        if self._pump_task is not None and not self._pump_task.done():
            self._pump_task.cancel()
            try:
                await self._pump_task
            except (asyncio.CancelledError, framesmod.SourceFailed):
                pass
        if self._source is not None:
            self._source.close()
        self.frame_bus.close()
        await self.loop.stop()
        if self.recording is not None:
            self.manifest = await self.recording.finalize()
        await self.supervisor.shutdown()
        self.result_hub.close()
        await self.server.stop()

    async def run(self) -> int:
        """Full lifecycle for the CLI: start, pump until the source ends (or
        forever for live sources), clean shutdown. Returns an exit code."""
        try:
            await self.start()
        except OSError as exc:
            log.error("BindError: %s", exc)
            await self.stop()
            return 1
        except Exception as exc:
            log.error("startup failed: %s", exc)
            await self.stop()
            return 1
        code = 0
        try:
            await self.wait_source_done()
        except framesmod.SourceFailed:
            code = 1
        except asyncio.CancelledError:
            pass  # interrupt(): fall through to the ordered shutdown
        finally:
            await self.stop()
        return code


def _substitute(child, gateway_url: str):
    """Fill {gateway}/{host}/{port} placeholders in a supervised command once
    the real bind address is known (the port may have been auto-assigned).
    Plain substring replacement: command args may carry arbitrary JSON."""
    host, _, port = gateway_url.removeprefix("ws://").partition(":")
    command = [arg.replace("{gateway}", f"{gateway_url}/engine")
                  .replace("{host}", host)
                  .replace("{port}", port)
               for arg in child.command]
    return replace(child, command=command)
