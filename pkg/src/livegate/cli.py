"""livegate command line: run / bench / record-verify / replay.

Exit codes: 0 ok, 1 runtime failure, 2 config error.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import logging
import os
import signal
import sys
from pathlib import Path
from typing import Optional

from . import bench as benchmod
from . import recorder as recordermod
from .config import ParseError, SessionConfig, config_from_dict, parse_config
from .frames import InvalidSpec, SourceSpec, parse_source_arg
from .gateway import PipelineConfig
from .session import Session, StackUnhealthy
from .supervisor import ChildSpec

log = logging.getLogger(__name__)

ENV_CONFIG = "LIVEGATE_CONFIG"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="livegate",
        description="Deploy image-based AI models against live medical video.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a live session")
    run.add_argument("--config", help=f"session config JSON (or ${ENV_CONFIG})")
    run.add_argument("--source", help="device:<id> | replay:<dir>[@speed] | "
                                      "synthetic:<pattern>:<W>x<H>@<fps>")
    run.add_argument("--bind", help="host:port (default 127.0.0.1:8780)")
    run.add_argument("--allow-lan", action="store_true", default=None,
                     help="permit binding a non-loopback address")
    run.add_argument("--record", action="store_true", default=None,
                     help="record the stream in parallel")
    run.add_argument("--output-dir", help="recording output directory")
    run.add_argument("--viewer-dir", help="directory with the built viewer bundle")
    run.add_argument("--max-frames", type=int, help="stop after N frames (testing)")
    run.add_argument("--log-level", default=None)

    bench = sub.add_parser("bench", help="measure native vs framework per-frame latency")
    bench.add_argument("--engine-delay-ms", type=float, default=0.0)
    bench.add_argument("--samples", type=int, default=benchmod.DEFAULT_SAMPLES)
    bench.add_argument("--warmup", type=int, default=benchmod.DEFAULT_WARMUP)
    bench.add_argument("--fps", type=float, default=10.0)
    bench.add_argument("--csv", help="write framework per-frame samples to this path")
    bench.add_argument("--machine", help="machine label for the report")

    verify = sub.add_parser("record-verify", help="check a recording's integrity")
    verify.add_argument("dir", help="recording directory (with manifest.json)")

    replay = sub.add_parser("replay", help="run a session with a recording as source")
    replay.add_argument("dir", help="recording directory")
    replay.add_argument("--speed", type=float, default=1.0)
    replay.add_argument("--config", help="session config to use (source is overridden)")
    replay.add_argument("--bind", help="host:port (default 127.0.0.1:8780)")
    replay.add_argument("--record", action="store_true", default=None)
    replay.add_argument("--log-level", default=None)

    return parser


def default_config(source: SourceSpec) -> SessionConfig:
    """Flag-only sessions get one supervised mock engine out of the box."""
    child = ChildSpec(
        name="mock-1",
        command=[sys.executable, "-m", "livegate.mock_engine",
                 "--gateway", "{gateway}", "--name", "mock-1"],
    )
    return SessionConfig(source=source, pipeline=PipelineConfig(stages=["mock-1"]),
                         engines=[child])


def _load_run_config(args) -> SessionConfig:
    overrides = {
        "source": args.source,
        "bind": args.bind,
        "allow_lan": args.allow_lan,
        "record": args.record,
        "output_dir": args.output_dir,
        "viewer_dir": args.viewer_dir,
        "log_level": args.log_level,
    }
    config_path = args.config or os.environ.get(ENV_CONFIG)
    if config_path:
        return parse_config(config_path, overrides)
    if not args.source:
        raise ParseError("no --config and no --source given")
    cfg = default_config(parse_source_arg(args.source))
    for key in ("bind",):
        if overrides[key]:
            host, _, port = overrides[key].rpartition(":")
            cfg.bind_host, cfg.bind_port = host or "127.0.0.1", int(port)
    if overrides["allow_lan"]:
        cfg.allow_lan = True
    if overrides["record"]:
        cfg.record = True
    if overrides["output_dir"]:
        cfg.output_dir = overrides["output_dir"]
    if overrides["viewer_dir"]:
        cfg.viewer_dir = overrides["viewer_dir"]
    if overrides["log_level"]:
        cfg.log_level = overrides["log_level"]
    cfg.validate()
    return cfg


async def _run_session(cfg: SessionConfig, max_frames: Optional[int] = None) -> int:
    session = Session(cfg, max_frames=max_frames, logs_dir="logs")
    loop = asyncio.get_running_loop()
    for sig in (signal.SIGINT, signal.SIGTERM):
        loop.add_signal_handler(sig, session.interrupt)
    code = await session.run()
    if session.manifest is not None:
        print(f"recording: {session.recording.dir} "
              f"({session.manifest['frame_count']} frames, "
              f"complete={session.manifest['complete']})")
    return code


def cmd_run(args) -> int:
    try:
        cfg = _load_run_config(args)
    except (ParseError, InvalidSpec) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    _setup_logging(cfg.log_level)
    return asyncio.run(_run_session(cfg, max_frames=args.max_frames))


def cmd_bench(args) -> int:
    _setup_logging("info")
    delay = args.engine_delay_ms
    # sleep engines need no JIT warmup; a handful of calls settles the timer
    native = benchmod.measure_native(
        benchmod.make_sleep_engine(delay), benchmod.bench_frames(),
        n_warmup=min(args.warmup, 5), n_samples=args.samples)
    cfg = benchmod.bench_session_config(delay, fps=args.fps)
    try:
        framework = asyncio.run(benchmod.measure_framework(
            cfg, n_warmup=args.warmup, n_samples=args.samples))
    except StackUnhealthy as exc:
        print(f"bench failed: {exc}", file=sys.stderr)
        return 1
    report = benchmod.diff_report(native, framework, machine=args.machine)
    print(benchmod.format_table(report))
    if args.csv:
        benchmod.write_samples_csv(framework, args.csv)
        print(f"per-frame samples written to {args.csv}")
    return 0


def cmd_record_verify(args) -> int:
    try:
        report = recordermod.verify_recording(args.dir)
    except (recordermod.ManifestMissing, recordermod.ContainerMissing) as exc:
        print(f"not a recording: {exc}", file=sys.stderr)
        return 1
    if report.ok:
        print(f"ok: {report.frame_count} frames verified")
        return 0
    print(f"corrupt: first_bad_seq={report.first_bad_seq} ({report.detail})",
          file=sys.stderr)
    return 1


def cmd_replay(args) -> int:
    source_arg = f"replay:{args.dir}@{args.speed}"
    try:
        if args.config:
            cfg = parse_config(args.config, {"source": source_arg, "bind": args.bind,
                                             "record": args.record,
                                             "log_level": args.log_level})
        else:
            cfg = default_config(parse_source_arg(source_arg))
            if args.bind:
                host, _, port = args.bind.rpartition(":")
                cfg.bind_host, cfg.bind_port = host or "127.0.0.1", int(port)
            if args.record:
                cfg.record = True
    except (ParseError, InvalidSpec) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    _setup_logging(cfg.log_level if args.log_level is None else args.log_level)
    return asyncio.run(_run_session(cfg))


def _setup_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "run": cmd_run,
        "bench": cmd_bench,
        "record-verify": cmd_record_verify,
        "replay": cmd_replay,
    }
    try:
        return handlers[args.command](args)
    except KeyboardInterrupt:
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
