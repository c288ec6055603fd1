"""Per-frame latency methodology: native (direct call on frames) versus
framework (full capture -> bus -> gateway -> engine -> result path over real
sockets), with a difference row.

Native and framework runs cannot be paired, so the difference uncertainty is
the standard error of a difference of independent means,
sqrt(s1^2/n1 + s2^2/n2).
"""

from __future__ import annotations

import asyncio
import csv
import json
import platform
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import bus as busmod
from .config import SessionConfig
from .frames import Frame, SourceSpec, synthetic_pattern
from .gateway import PipelineConfig
from .mock_engine import DEFAULT_SCRIPT
from .session import Session, StackUnhealthy
from .supervisor import ChildSpec

DEFAULT_WARMUP = 30
DEFAULT_SAMPLES = 300
BENCH_WIDTH = 640
BENCH_HEIGHT = 480
BENCH_ENGINE = "bench-engine"

CSV_COLUMNS = ("seq", "t_capture_ns", "t_result_ns", "latency_s")


class TooFewSamples(ValueError):
    pass


@dataclass(slots=True)
class Sample:
    seq: int
    t_capture_ns: int
    t_result_ns: int
    latency_s: float


@dataclass(slots=True)
class LatencyStats:
    n: int
    mean_s: float
    std_s: float
    p50_s: float
    p95_s: float
    p99_s: float
    per_frame: list[Sample]

    def summary(self) -> str:
        return (f"n={self.n} mean={self.mean_s:.4f}s std={self.std_s:.4f}s "
                f"p50={self.p50_s:.4f}s p95={self.p95_s:.4f}s p99={self.p99_s:.4f}s")


def stats_from_samples(samples: Sequence[Sample]) -> LatencyStats:
    if len(samples) < 2:
        raise TooFewSamples(f"need at least 2 samples, got {len(samples)}")
    lat = np.array([s.latency_s for s in samples], dtype=np.float64)
    p50, p95, p99 = np.percentile(lat, [50, 95, 99])
    return LatencyStats(
        n=len(samples),
        mean_s=float(np.mean(lat)),
        std_s=float(np.std(lat, ddof=1)),
        p50_s=float(p50),
        p95_s=float(p95),
        p99_s=float(p99),
        per_frame=list(samples),
    )


def make_sleep_engine(delay_ms: float) -> Callable[[Frame], None]:
    """The bench workload: a callable that costs exactly the scripted engine
    delay, used identically on the native and framework sides."""
    def engine(frame: Frame) -> None:
        if delay_ms:
            time.sleep(delay_ms / 1000.0)
    return engine


def bench_frames(n: int = 8, width: int = BENCH_WIDTH, height: int = BENCH_HEIGHT) -> list[Frame]:
    now = time.monotonic_ns()
    return [Frame(i, now, time.time_ns(), width, height, "GRAY8",
                  synthetic_pattern("moving-gradient", width, height, i))
            for i in range(n)]


def measure_native(engine_callable: Callable[[Frame], None], frames: Iterable[Frame],
                   n_warmup: int = DEFAULT_WARMUP,
                   n_samples: int = DEFAULT_SAMPLES) -> LatencyStats:
    """Time the engine work alone, call by call, on the monotonic clock."""
    if n_samples < 2:
        raise TooFewSamples(f"n_samples must be >= 2, got {n_samples}")
    pool = list(frames)
    samples = []
    for i in range(n_warmup + n_samples):
        frame = pool[i % len(pool)]
        t0 = time.monotonic_ns()
        engine_callable(frame)
        t1 = time.monotonic_ns()
        samples.append(Sample(i, t0, t1, (t1 - t0) / 1e9))
    return stats_from_samples(samples[n_warmup:])


def bench_session_config(engine_delay_ms: float, fps: float = 10.0,
                         width: int = BENCH_WIDTH, height: int = BENCH_HEIGHT,
                         record: bool = False, output_dir: str = "recordings") -> SessionConfig:
    """Synthetic-source session with one supervised mock engine whose scripted
    delay is the benchmark workload."""
    script = [dict(DEFAULT_SCRIPT[0], delay_ms=engine_delay_ms)]
    child = ChildSpec(
        name=BENCH_ENGINE,
        command=[sys.executable, "-m", "livegate.mock_engine",
                 "--gateway", "{gateway}", "--name", BENCH_ENGINE,
                 "--script", json.dumps(script)],
    )
    return SessionConfig(
        source=SourceSpec(kind="synthetic", pattern="moving-gradient",
                          width=width, height=height, fps=fps),
        bind_port=0,  # ephemeral; benches must not collide with a live session
        record=record,
        output_dir=output_dir,
        pipeline=PipelineConfig(stages=[BENCH_ENGINE],
                                engine_timeout_ms=max(2000.0, engine_delay_ms * 4 + 2000.0)),
        engines=[child],
    )


async def measure_framework(config: SessionConfig,
                            n_warmup: int = DEFAULT_WARMUP,
                            n_samples: int = DEFAULT_SAMPLES,
                            engine_wait_s: float = 15.0) -> LatencyStats:
    """Per-frame time = t_result - t_capture through the full running stack."""
    if n_samples < 2:
        raise TooFewSamples(f"n_samples must be >= 2, got {n_samples}")
    session = Session(config)
    results_sub = session.result_hub.subscribe(
        busmod.RELIABLE, capacity=n_warmup + n_samples + 64)
    await session.start()
    try:
        await session.wait_for_engines(timeout_s=engine_wait_s)
        collected: list[dict] = []
        while len(collected) < n_warmup + n_samples:
            result = await results_sub.recv()
            if result["status"] == "ok":
                collected.append(result)
    except (busmod.Closed, busmod.Overflow) as exc:
        raise StackUnhealthy(f"result stream ended early: {exc!r}") from exc
    finally:
        await session.stop()
    samples = [Sample(r["frame_seq"], r["t_capture_ns"], r["t_result_ns"],
                      (r["t_result_ns"] - r["t_capture_ns"]) / 1e9)
               for r in collected[n_warmup:]]
    return stats_from_samples(samples)


@dataclass(slots=True)
class DiffReport:
    machine: str
    native: LatencyStats
    framework: LatencyStats
    diff_mean_s: float
    diff_std_s: float


def diff_report(native: LatencyStats, framework: LatencyStats,
                machine: Optional[str] = None) -> DiffReport:
    sem = (framework.std_s ** 2 / framework.n + native.std_s ** 2 / native.n) ** 0.5
    return DiffReport(
        machine=machine or platform.node() or "local",
        native=native,
        framework=framework,
        diff_mean_s=framework.mean_s - native.mean_s,
        diff_std_s=sem,
    )


def format_table(report: DiffReport) -> str:
    rows = [
        ("machine", report.machine),
        ("native", f"{report.native.mean_s:.4f} ± {report.native.std_s:.4f}"),
        ("framework", f"{report.framework.mean_s:.4f} ± {report.framework.std_s:.4f}"),
        ("difference", f"{report.diff_mean_s:.4f} ± {report.diff_std_s:.4f}"),
    ]
    width = max(len(r[0]) for r in rows)
    lines = ["per-frame processing time (s)"]
    lines += [f"{name:<{width}}  {value}" for name, value in rows]
    lines.append("")
    lines.append(f"native    {report.native.summary()}")
    lines.append(f"framework {report.framework.summary()}")
    return "\n".join(lines)


def report_csv(report: DiffReport) -> str:
    header = ("machine,native_mean_s,native_std_s,framework_mean_s,"
              "framework_std_s,diff_mean_s,diff_std_s")
    row = (f"{report.machine},{report.native.mean_s!r},{report.native.std_s!r},"
           f"{report.framework.mean_s!r},{report.framework.std_s!r},"
           f"{report.diff_mean_s!r},{report.diff_std_s!r}")
    return header + "\n" + row + "\n"


def write_samples_csv(stats: LatencyStats, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for s in stats.per_frame:
            writer.writerow([s.seq, s.t_capture_ns, s.t_result_ns, repr(s.latency_s)])


def read_samples_csv(path: str | Path) -> list[Sample]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        return [Sample(int(r["seq"]), int(r["t_capture_ns"]), int(r["t_result_ns"]),
                       float(r["latency_s"])) for r in reader]
