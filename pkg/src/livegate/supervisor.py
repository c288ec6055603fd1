"""Child process supervision: spawn, health-check, restart with backoff.

Stands in for container orchestration at desk scale. Each child gets its own
monitor task, so one crashing (or crash-looping) child never affects its
siblings. Restart delays follow a capped geometric schedule that resets after
a stretch of healthy uptime, so startup flakiness doesn't penalize a session
hours later.
"""

from __future__ import annotations

import asyncio
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import aiohttp

log = logging.getLogger(__name__)

RESTART_POLICIES = ("always", "on-failure", "never")

STARTING = "starting"
UP = "up"
BACKING_OFF = "backing-off"
STOPPED = "stopped"


class SpawnFailed(RuntimeError):
    pass


@dataclass(slots=True)
class Backoff:
    initial_ms: float = 1000.0
    factor: float = 2.0
    max_ms: float = 30000.0

    def validate(self) -> None:
        if self.initial_ms <= 0:
            raise ValueError("initial_ms must be > 0")
        if self.factor < 1:
            raise ValueError("factor must be >= 1")
        if self.max_ms < self.initial_ms:
            raise ValueError("max_ms must be >= initial_ms")


@dataclass(slots=True)
class HealthCheck:
    url: str
    interval_ms: float = 5000.0
    failures_to_kill: int = 3


@dataclass(slots=True)
class ChildSpec:
    name: str
    command: list[str]
    restart: str = "always"
    backoff: Backoff = field(default_factory=Backoff)
    health: Optional[HealthCheck] = None
    reset_after_s: float = 60.0  # healthy uptime that clears the failure streak
    term_timeout_s: float = 5.0  # SIGTERM grace before SIGKILL

    def validate(self) -> None:
        if not self.name or not self.command:
            raise ValueError("child needs a name and a command")
        if self.restart not in RESTART_POLICIES:
            raise ValueError(f"restart must be one of {RESTART_POLICIES}")
        self.backoff.validate()


def backoff_delay_ms(backoff: Backoff, consecutive_failures: int) -> float:
    """Delay before restart number consecutive_failures+1: initial, initial*f, ..."""
    return min(backoff.initial_ms * backoff.factor ** consecutive_failures,
               backoff.max_ms)


def on_exit(policy: str, exit_code: int) -> str:
    """-> "restart" or "stop" per the child's restart policy."""
    if policy == "always":
        return "restart"
    if policy == "on-failure" and exit_code != 0:
        return "restart"
    return "stop"


class ChildHandle:
    def __init__(self, spec: ChildSpec, log_path: Optional[Path]):
        self.spec = spec
        self.state = STARTING
        self.proc: Optional[asyncio.subprocess.Process] = None
        self.restart_count = 0
        self.consecutive_failures = 0
        self.restart_delays_ms: list[float] = []  # applied schedule, in order
        self.stop_requested = False
        self.log_path = log_path
        self._log_file = None
        self._started_at = 0.0
        self._monitor_task: Optional[asyncio.Task] = None
        self._health_task: Optional[asyncio.Task] = None

    @property
    def pid(self) -> Optional[int]:
        return self.proc.pid if self.proc else None


class Supervisor:
    def __init__(self, logs_dir: Optional[str | Path] = None):
        self._logs_dir = Path(logs_dir) if logs_dir else None
        self._children: dict[str, ChildHandle] = {}
        self._shutdown = False

    @property
    def children(self) -> dict[str, ChildHandle]:
        return dict(self._children)

    async def spawn(self, spec: ChildSpec) -> ChildHandle:
        spec.validate()
        log_path = None
        if self._logs_dir is not None:
            self._logs_dir.mkdir(parents=True, exist_ok=True)
            log_path = self._logs_dir / f"{spec.name}.log"
        handle = ChildHandle(spec, log_path)
        await self._start_proc(handle)  # raises SpawnFailed
        self._children[spec.name] = handle
        handle._monitor_task = asyncio.get_running_loop().create_task(self._monitor(handle))
        if spec.health is not None:
            handle._health_task = asyncio.get_running_loop().create_task(self._health_loop(handle))
        return handle

    async def _start_proc(self, handle: ChildHandle) -> None:
        handle.state = STARTING
        stdout = asyncio.subprocess.DEVNULL
        if handle.log_path is not None:
            if handle._log_file is None:
                handle._log_file = handle.log_path.open("ab")
            stdout = handle._log_file
        try:
            handle.proc = await asyncio.create_subprocess_exec(
                *handle.spec.command, stdout=stdout,
                stderr=asyncio.subprocess.STDOUT)
        except (FileNotFoundError, PermissionError, OSError) as exc:
            handle.state = STOPPED
            raise SpawnFailed(f"{handle.spec.name}: {exc}") from exc
        handle._started_at = time.monotonic()
        handle.state = UP
        log.info("child %s up, pid %d", handle.spec.name, handle.proc.pid)

    async def _monitor(self, handle: ChildHandle) -> None:
        while True:
            rc = await handle.proc.wait()
            uptime = time.monotonic() - handle._started_at
            log.info("child %s exited rc=%s after %.1fs", handle.spec.name, rc, uptime)
            if self._shutdown or handle.stop_requested:
                handle.state = STOPPED
                return
            if on_exit(handle.spec.restart, rc) == "stop":
                handle.state = STOPPED
                return
            if uptime >= handle.spec.reset_after_s:
                handle.consecutive_failures = 0
            delay_ms = backoff_delay_ms(handle.spec.backoff, handle.consecutive_failures)
            handle.consecutive_failures += 1
            handle.restart_delays_ms.append(delay_ms)
            handle.state = BACKING_OFF
            log.info("child %s restarting in %.0f ms", handle.spec.name, delay_ms)
            await asyncio.sleep(delay_ms / 1000.0)
            if self._shutdown or handle.stop_requested:
                handle.state = STOPPED
                return
            try:
                await self._start_proc(handle)
            except SpawnFailed as exc:
                log.error("respawn failed, giving up: %s", exc)
                handle.state = STOPPED
                return
            handle.restart_count += 1

    async def _health_loop(self, handle: ChildHandle) -> None:
        health = handle.spec.health
        failures = 0
        timeout = aiohttp.ClientTimeout(total=max(health.interval_ms / 1000.0, 1.0))
        async with aiohttp.ClientSession(timeout=timeout) as session:
            while not self._shutdown and not handle.stop_requested:
                await asyncio.sleep(health.interval_ms / 1000.0)
                if handle.state != UP:
                    failures = 0
                    continue
                try:
                    async with session.get(health.url) as resp:
                        ok = resp.status < 500
                except (aiohttp.ClientError, asyncio.TimeoutError):
                    ok = False
                failures = 0 if ok else failures + 1
                if failures >= health.failures_to_kill:
                    log.warning("child %s failed %d health checks, killing",
                                handle.spec.name, failures)
                    failures = 0
                    self._kill(handle)

    @staticmethod
    def _kill(handle: ChildHandle) -> None:
        if handle.proc is not None and handle.proc.returncode is None:
            handle.proc.kill()

    async def stop_child(self, name: str) -> None:
        handle = self._children.get(name)
        if handle is None:
            return
        handle.stop_requested = True
        await self._terminate(handle)
        await self._reap(handle)

    async def shutdown(self) -> None:
        """Terminate everything gracefully, force-kill stragglers. Idempotent."""
        self._shutdown = True
        handles = list(self._children.values())
        for handle in handles:
            handle.stop_requested = True
        await asyncio.gather(*(self._terminate(h) for h in handles))
        for handle in handles:
            await self._reap(handle)

    async def _terminate(self, handle: ChildHandle) -> None:
        proc = handle.proc
        if proc is None or proc.returncode is not None:
            handle.state = STOPPED
            return
        try:
            proc.terminate()
        except ProcessLookupError:
            return
        try:
            await asyncio.wait_for(proc.wait(), handle.spec.term_timeout_s)
        except asyncio.TimeoutError:
            log.warning("child %s ignored SIGTERM, killing", handle.spec.name)
            self._kill(handle)
            await proc.wait()

    async def _reap(self, handle: ChildHandle) -> None:
        for task in (handle._monitor_task, handle._health_task):
            if task is not None:
                task.cancel()
                try:
                    await task
                except asyncio.CancelledError:
                    pass
        if handle._log_file is not None:
            handle._log_file.close()
            handle._log_file = None
        handle.state = STOPPED
