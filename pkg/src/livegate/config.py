"""Session configuration: JSON file + CLI flag overrides.

One config describes the whole topology: source, bind address, recording,
pipeline, and the engines (supervised child processes and/or external engines
that connect on their own). Binding anywhere but loopback requires an
explicit allow_lan — nothing leaves the machine unless asked.
"""

from __future__ import annotations

import ipaddress
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .frames import InvalidSpec, SourceSpec, parse_source_arg
from .gateway import FreezeConfig, PipelineConfig
from .supervisor import Backoff, ChildSpec, HealthCheck

DEFAULT_BIND = "127.0.0.1:8780"


class ParseError(ValueError):
    pass


class UnresolvedEngine(ParseError):
    pass


@dataclass(slots=True)
class SessionConfig:
    source: SourceSpec
    bind_host: str = "127.0.0.1"
    bind_port: int = 8780
    allow_lan: bool = False
    record: bool = False
    output_dir: str = "recordings"
    pipeline: PipelineConfig = field(default_factory=lambda: PipelineConfig(stages=["mock-1"]))
    engines: list[ChildSpec] = field(default_factory=list)
    external_engines: list[str] = field(default_factory=list)
    log_level: str = "info"
    viewer_dir: Optional[str] = None

    def validate(self) -> None:
        self.source.validate()
        self.pipeline.validate()
        if not 1 <= self.bind_port <= 65535:
            raise ParseError(f"bind port {self.bind_port} outside [1, 65535]")
        if not self.allow_lan and not _is_loopback(self.bind_host):
            raise ParseError(
                f"refusing to bind non-loopback address {self.bind_host!r} "
                "without allow_lan / --allow-lan")
        declared = {c.name for c in self.engines} | set(self.external_engines)
        for stage in self.pipeline.stages:
            if stage not in declared:
                raise UnresolvedEngine(
                    f"pipeline stage {stage!r} matches no declared or external engine")
        for child in self.engines:
            child.validate()

    def to_dict(self) -> dict:
        engines = [_child_to_dict(c) for c in self.engines]
        engines += [{"name": n, "external": True} for n in self.external_engines]
        return {
            "source": self.source.to_dict(),
            "bind": f"{self.bind_host}:{self.bind_port}",
            "allow_lan": self.allow_lan,
            "record": self.record,
            "output_dir": self.output_dir,
            "pipeline": _pipeline_to_dict(self.pipeline),
            "engines": engines,
            "log_level": self.log_level,
            "viewer_dir": self.viewer_dir,
        }


def _is_loopback(host: str) -> bool:
    if host == "localhost":
        return True
    try:
        return ipaddress.ip_address(host).is_loopback
    except ValueError:
        return False


def _pipeline_to_dict(p: PipelineConfig) -> dict:
    return {
        "stages": list(p.stages),
        "mode": p.mode,
        "freeze": {"downsample": p.freeze.downsample, "tau": p.freeze.tau, "k": p.freeze.k},
        "engine_timeout_ms": p.engine_timeout_ms,
    }


def _pipeline_from_dict(data: dict) -> PipelineConfig:
    freeze = data.get("freeze", {})
    return PipelineConfig(
        stages=list(data.get("stages", [])),
        mode=data.get("mode", "continuous"),
        freeze=FreezeConfig(
            downsample=int(freeze.get("downsample", 64)),
            tau=float(freeze.get("tau", 2.0)),
            k=int(freeze.get("k", 5)),
        ),
        engine_timeout_ms=float(data.get("engine_timeout_ms", 2000.0)),
    )


def _child_to_dict(c: ChildSpec) -> dict:
    out = {
        "name": c.name,
        "command": list(c.command),
        "restart": c.restart,
        "backoff": {"initial_ms": c.backoff.initial_ms, "factor": c.backoff.factor,
                    "max_ms": c.backoff.max_ms},
    }
    if c.health is not None:
        out["health"] = {"url": c.health.url, "interval_ms": c.health.interval_ms,
                         "failures_to_kill": c.health.failures_to_kill}
    return out


def _child_from_dict(data: dict) -> ChildSpec:
    backoff = data.get("backoff", {})
    health = data.get("health")
    return ChildSpec(
        name=data["name"],
        command=list(data.get("command", [])),
        restart=data.get("restart", "always"),
        backoff=Backoff(
            initial_ms=float(backoff.get("initial_ms", 1000.0)),
            factor=float(backoff.get("factor", 2.0)),
            max_ms=float(backoff.get("max_ms", 30000.0)),
        ),
        health=HealthCheck(
            url=health["url"],
            interval_ms=float(health.get("interval_ms", 5000.0)),
            failures_to_kill=int(health.get("failures_to_kill", 3)),
        ) if health else None,
    )


def config_from_dict(data: dict) -> SessionConfig:
    try:
        source = data["source"]
        if isinstance(source, str):
            source_spec = parse_source_arg(source)
        else:
            source_spec = SourceSpec.from_dict(source)
        bind = data.get("bind", DEFAULT_BIND)
        host, _, port = bind.rpartition(":")
        engines = []
        external = []
        for entry in data.get("engines", []):
            if entry.get("external"):
                external.append(entry["name"])
            else:
                engines.append(_child_from_dict(entry))
        cfg = SessionConfig(
            source=source_spec,
            bind_host=host or "127.0.0.1",
            bind_port=int(port),
            allow_lan=bool(data.get("allow_lan", False)),
            record=bool(data.get("record", False)),
            output_dir=str(data.get("output_dir", "recordings")),
            pipeline=_pipeline_from_dict(data.get("pipeline", {})),
            engines=engines,
            external_engines=external,
            log_level=str(data.get("log_level", "info")),
            viewer_dir=data.get("viewer_dir"),
        )
    except InvalidSpec as exc:
        raise ParseError(f"source: {exc}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"bad config field: {exc}") from exc
    try:
        cfg.validate()
    except ParseError:
        raise
    except ValueError as exc:
        raise ParseError(str(exc)) from exc
    return cfg


def parse_config(path: str | Path, overrides: Optional[dict] = None) -> SessionConfig:
    """Load the JSON session config; overrides (flag values) win over file values."""
    path = Path(path)
    try:
        raw = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ParseError(f"{path}: top level must be a JSON object")
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_dict(data)
