"""Prediction task manager/router.

Pulls the latest frame from the bus, walks it through the configured engine
pipeline stage by stage, applies frozen-screen gating, and publishes results
to the result hub. Engine failures degrade to marker results; they never tear
down the loop, the recorder, or the bus.
"""

from __future__ import annotations

import asyncio
import logging
import time
from dataclasses import dataclass, field
from typing import Awaitable, Callable, Optional

import aiohttp

from . import bus as busmod
from . import engine_protocol as proto
from . import wire
from .frames import Frame
from .freeze import (DEFAULT_DOWNSAMPLE, DEFAULT_K, DEFAULT_TAU, FreezeState,
                     freeze_score, freeze_update)

log = logging.getLogger(__name__)

RESULT_VERSION = 1

STATUS_OK = "ok"
STATUS_UNAVAILABLE = "engine_unavailable"
STATUS_TIMEOUT = "timeout"
STATUS_ENGINE_ERROR = "engine_error"

CONTINUOUS = "continuous"
FROZEN_ONLY = "frozen-only"


class EngineTimeout(RuntimeError):
    pass


class EngineBusy(RuntimeError):
    pass


@dataclass(slots=True)
class FreezeConfig:
    downsample: int = DEFAULT_DOWNSAMPLE
    tau: float = DEFAULT_TAU
    k: int = DEFAULT_K

    def validate(self) -> None:
        if self.tau < 0:
            raise ValueError("tau must be >= 0")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.downsample < 1:
            raise ValueError("downsample must be >= 1")


@dataclass(slots=True)
class PipelineConfig:
    stages: list[str] = field(default_factory=list)
    mode: str = CONTINUOUS
    freeze: FreezeConfig = field(default_factory=FreezeConfig)
    engine_timeout_ms: float = 2000.0

    def validate(self) -> None:
        if not self.stages:
            raise ValueError("pipeline needs at least one stage")
        if self.mode not in (CONTINUOUS, FROZEN_ONLY):
            raise ValueError(f"mode must be {CONTINUOUS!r} or {FROZEN_ONLY!r}")
        if self.engine_timeout_ms <= 0:
            raise ValueError("engine_timeout_ms must be > 0")
        self.freeze.validate()


class EngineConn:
    """Gateway-side handle for one connected engine: request ids, in-flight
    accounting, reply correlation."""

    def __init__(self, descriptor: proto.EngineDescriptor,
                 send_bytes: Callable[[bytes], Awaitable[None]]):
        self.descriptor = descriptor
        self._send_bytes = send_bytes
        self._pending: dict[int, asyncio.Future] = {}
        self._next_id = 1
        self.connected = True

    @property
    def in_flight(self) -> int:
        return len(self._pending)

    async def infer(self, frame_bytes: bytes, upstream: Optional[dict],
                    timeout_s: float) -> dict:
        if not self.connected:
            raise proto.ConnectionLost(self.descriptor.name)
        if self.in_flight >= self.descriptor.max_concurrent:
            raise EngineBusy(f"{self.descriptor.name} at max_concurrent")
        request_id = self._next_id
        self._next_id += 1
        fut: asyncio.Future = asyncio.get_running_loop().create_future()
        self._pending[request_id] = fut
        try:
            await self._send_bytes(proto.encode_infer_request(request_id, frame_bytes, upstream))
            return await asyncio.wait_for(fut, timeout_s)
        except asyncio.TimeoutError:
            raise EngineTimeout(f"{self.descriptor.name} exceeded {timeout_s * 1000:.0f} ms")
        except (ConnectionError, aiohttp.ClientError) as exc:
            raise proto.ConnectionLost(str(exc)) from exc
        finally:
            self._pending.pop(request_id, None)

    def on_reply(self, text: str) -> None:
        try:
            reply = proto.parse_reply(text)
        except ValueError as exc:
            log.warning("bad reply from %s: %s", self.descriptor.name, exc)
            return
        fut = self._pending.get(reply["request_id"])
        if fut is None or fut.done():
            log.debug("unsolicited reply id=%s from %s", reply["request_id"],
                      self.descriptor.name)
            return
        fut.set_result(reply)

    def on_disconnect(self) -> None:
        self.connected = False
        for fut in self._pending.values():
            if not fut.done():
                fut.set_exception(proto.ConnectionLost(self.descriptor.name))


class EngineRegistry:
    """Engines currently (or previously) connected; names stay listed after a
    disconnect so health output shows down -> up transitions on restart."""

    def __init__(self):
        self._conns: dict[str, EngineConn] = {}
        self._states: dict[str, str] = {}

    def register(self, conn: EngineConn) -> None:
        name = conn.descriptor.name
        existing = self._conns.get(name)
        if existing is not None and existing.connected:
            raise proto.DuplicateName(name)
        self._conns[name] = conn
        self._states[name] = "up"

    def unregister(self, conn: EngineConn) -> None:
        name = conn.descriptor.name
        conn.on_disconnect()
        if self._conns.get(name) is conn:
            self._states[name] = "down"

    def get(self, name: str) -> Optional[EngineConn]:
        conn = self._conns.get(name)
        return conn if conn is not None and conn.connected else None

    def health(self) -> list[dict]:
        return [{"name": n, "state": s} for n, s in sorted(self._states.items())]


def make_result_hub() -> busmod.Bus:
    return busmod.Bus(key=lambda result: result["frame_seq"])


async def take_latest(sub: busmod.Subscription) -> Frame:
    """Most recently published frame at call time; blocks if none is newer
    than the last one taken."""
    return await sub.recv()


def _base_result(frame: Frame, engine: str, t_submit_ns: int, t_result_ns: int,
                 frozen: bool) -> dict:
    return {
        "result_version": RESULT_VERSION,
        "frame_seq": frame.seq,
        "t_capture_ns": frame.t_capture_ns,
        "engine": engine,
        "t_submit_ns": t_submit_ns,
        "t_result_ns": t_result_ns,
        "frozen": frozen,
    }


def make_result(frame: Frame, engine: str, reply: dict, t_submit_ns: int,
                t_result_ns: int, frozen: bool) -> dict:
    result = _base_result(frame, engine, t_submit_ns, t_result_ns, frozen)
    result.update({
        "status": STATUS_OK,
        "error": None,
        "verdict": reply["verdict"],
        "plane": reply["plane"],
        "concepts": reply["concepts"],
        "engine_ms": reply["engine_ms"],
    })
    return result


def make_marker(frame: Frame, engine: str, status: str, error: str,
                t_submit_ns: int, t_result_ns: int, frozen: bool) -> dict:
    """Schema-conformant result that signals failure instead of a prediction,
    so viewers degrade visibly rather than showing a stale verdict."""
    result = _base_result(frame, engine, t_submit_ns, t_result_ns, frozen)
    result.update({
        "status": status,
        "error": error,
        "verdict": "unknown_plane",
        "plane": "other",
        "concepts": [],
        "engine_ms": 0.0,
    })
    return result


async def dispatch(frame: Frame, pipeline: PipelineConfig,
                   registry: EngineRegistry, frozen: bool = False) -> dict:
    """Send one frame through the stage list; stage i+1 sees stage i's reply.

    Any stage failure produces a marker result and abandons this frame — the
    loop moves on to the newest frame, never retrying with a stale one.
    """
    frame_bytes = wire.encode_frame(frame)
    timeout_s = pipeline.engine_timeout_ms / 1000.0
    upstream: Optional[dict] = None
    t_submit = time.monotonic_ns()
    for stage in pipeline.stages:
        conn = registry.get(stage)
        if conn is None:
            return make_marker(frame, stage, STATUS_UNAVAILABLE,
                               f"engine {stage!r} not connected",
                               t_submit, time.monotonic_ns(), frozen)
        try:
            reply = await conn.infer(frame_bytes, upstream, timeout_s)
        except EngineTimeout as exc:
            return make_marker(frame, stage, STATUS_TIMEOUT, str(exc),
                               t_submit, time.monotonic_ns(), frozen)
        except (proto.ConnectionLost, EngineBusy) as exc:
            return make_marker(frame, stage, STATUS_UNAVAILABLE, str(exc),
                               t_submit, time.monotonic_ns(), frozen)
        if reply.get("error"):
            return make_marker(frame, stage, STATUS_ENGINE_ERROR, str(reply["error"]),
                               t_submit, time.monotonic_ns(), frozen)
        upstream = reply
    return make_result(frame, pipeline.stages[-1], upstream, t_submit,
                       time.monotonic_ns(), frozen)


class PipelineLoop:
    """One dispatch loop per pipeline: take latest frame, gate on freeze
    state, dispatch, publish the result."""

    def __init__(self, frame_bus: busmod.Bus, result_hub: busmod.Bus,
                 registry: EngineRegistry, pipeline: PipelineConfig,
                 submission_log: Optional[list] = None):
        pipeline.validate()
        self._bus = frame_bus
        self._hub = result_hub
        self._registry = registry
        self._pipeline = pipeline
        self.submission_log = submission_log  # (seq, t_submit_ns) when enabled
        self.freeze_state = FreezeState()
        self.results_published = 0
        self.subscription: Optional[busmod.Subscription] = None
        self._prev_frame: Optional[Frame] = None
        self._task: Optional[asyncio.Task] = None

    def start(self) -> asyncio.Task:
        self._task = asyncio.get_running_loop().create_task(self.run())
        return self._task

    async def stop(self) -> None:
        if self._task is not None:
            self._task.cancel()
            try:
                await self._task
            except asyncio.CancelledError:
                pass

    async def run(self) -> None:
        sub = self._bus.subscribe(busmod.LATEST)
        self.subscription = sub
        cfg = self._pipeline
        try:
            while True:
                frame = await take_latest(sub)
                if self._prev_frame is not None:
                    score = freeze_score(self._prev_frame, frame, cfg.freeze.downsample)
                    self.freeze_state = freeze_update(
                        self.freeze_state, score, cfg.freeze.tau, cfg.freeze.k)
                self._prev_frame = frame
                if cfg.mode == FROZEN_ONLY and not self.freeze_state.frozen:
                    continue
                if self.submission_log is not None:
                    # No await between taking the frame and this stamp, so the
                    # frame is provably the newest published at this instant.
                    self.submission_log.append((frame.seq, time.monotonic_ns()))
                result = await dispatch(frame, cfg, self._registry,
                                        frozen=self.freeze_state.frozen)
                self._hub.publish(result)
                self.results_published += 1
        except busmod.Closed:
            pass
        finally:
            self._bus.unsubscribe(sub)
