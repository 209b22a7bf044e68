"""Scenario configuration.

Config files are YAML (JSON is accepted too, being a subset)::

    iaas_count: 4
    fleet: default              # or: robots: [[iaas1 metadata files], [iaas2 ...], ...]
    transport: {mode: sim, latency_ms: 5, jitter_ms: 0.1, d_proc_ms: 1, seed: 0}
    backend: {kind: presence}   # or: {kind: overlay, topology: ring}
    script:
      - {at_ms: 0, iaas: 1, caps: [light, kicking-arm], site: [6, 2], kind: fire-suppression}
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import yaml

from ..errors import UsageError
from ..overlay import TOPOLOGIES
from .fleet import FLEETS

BACKENDS = ("presence", "overlay")
TRANSPORTS = ("sim", "socket")


@dataclass(frozen=True)
class ScriptedRequest:
    at_ms: float
    iaas: int
    caps: tuple[str, ...]
    site: tuple[float, float] = (0.0, 0.0)
    kind: str = "generic"
    duration_est: float = 1000.0

    @classmethod
    def from_dict(cls, raw: dict) -> ScriptedRequest:
        return cls(float(raw.get("at_ms", 0.0)), int(raw.get("iaas", 1)), tuple(raw["caps"]),
                   tuple(float(v) for v in raw.get("site", (0.0, 0.0))), raw.get("kind", "generic"),
                   float(raw.get("duration_est", 1000.0)))


@dataclass(frozen=True)
class ScenarioConfig:
    iaas_count: int = 4
    fleet: str = "default"
    # explicit metadata: one list of documents (dicts) or file paths per IaaS
    robots: tuple | None = None
    transport: str = "sim"
    latency_ms: float = 5.0
    jitter_ms: float = 0.1
    d_proc_ms: float = 1.0
    seed: int = 0
    backend: str = "presence"
    topology: str = "ring"
    script: tuple[ScriptedRequest, ...] = ()
    remote_penalty: float = 0.25
    engagement: float = 0.5
    # robot endpoint -> per-task failure probability
    faults: dict = field(default_factory=dict)
    storage_dir: str | None = None
    reps: int = 30

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.iaas_count < 1:
            raise UsageError("iaas_count must be at least 1")
        if self.transport not in TRANSPORTS:
            raise UsageError(f"transport must be one of {TRANSPORTS}")
        if self.backend not in BACKENDS:
            raise UsageError(f"backend must be one of {BACKENDS}")
        if self.topology not in TOPOLOGIES:
            raise UsageError(f"topology must be one of {TOPOLOGIES}")
        if self.transport == "sim":
            for name in ("latency_ms", "d_proc_ms"):
                v = getattr(self, name)
                if not (math.isfinite(v) and v > 0):
                    raise UsageError(f"{name} must be positive in sim mode")
            if self.jitter_ms < 0:
                raise UsageError("jitter_ms must be non-negative")
        if self.robots is None and self.fleet not in FLEETS:
            raise UsageError(f"unknown fleet {self.fleet!r}; expected one of {sorted(FLEETS)}")
        if self.robots is not None and len(self.robots) != self.iaas_count:
            raise UsageError("robots must list one entry per IaaS")
        times = [r.at_ms for r in self.script]
        if any(b < a for a, b in zip(times, times[1:])):
            raise UsageError("script times must be non-decreasing")
        for r in self.script:
            if not 1 <= r.iaas <= self.iaas_count:
                raise UsageError(f"script targets IaaS {r.iaas}, scenario has {self.iaas_count}")
        if self.reps < 1:
            raise UsageError("reps must be at least 1")

    def with_(self, **changes) -> ScenarioConfig:
        return replace(self, **changes)

    def fleet_documents(self, base_dir: Path | None = None) -> list[list[dict | str]]:
        if self.robots is None:
            return FLEETS[self.fleet](self.iaas_count)
        out = []
        for docs in self.robots:
            row = []
            for item in docs:
                if isinstance(item, (str, Path)):
                    path = Path(item)
                    if base_dir is not None and not path.is_absolute():
                        path = base_dir / path
                    row.append(path.read_text(encoding="utf-8"))
                else:
                    row.append(item)
            out.append(row)
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> ScenarioConfig:
        raw = dict(raw or {})
        kwargs = {}
        transport = raw.pop("transport", None)
        if isinstance(transport, dict):
            kwargs["transport"] = transport.get("mode", "sim")
            for key in ("latency_ms", "jitter_ms", "d_proc_ms", "seed"):
                if key in transport:
                    kwargs[key] = transport[key]
        elif transport is not None:
            kwargs["transport"] = transport
        backend = raw.pop("backend", None)
        if isinstance(backend, dict):
            kwargs["backend"] = backend.get("kind", "presence")
            if "topology" in backend:
                kwargs["topology"] = backend["topology"]
        elif backend is not None:
            kwargs["backend"] = backend
        if "script" in raw:
            kwargs["script"] = tuple(ScriptedRequest.from_dict(r) for r in raw.pop("script") or ())
        if "robots" in raw and raw["robots"] is not None:
            kwargs["robots"] = tuple(tuple(r) for r in raw.pop("robots"))
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise UsageError(f"unknown config keys {sorted(unknown)}")
        kwargs.update(raw)
        return cls(**kwargs)


def load_config(path: str | Path) -> tuple[ScenarioConfig, Path]:
    """Parse a config file; returns the config and the directory it lives in."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise UsageError(f"cannot parse {path}: {exc}") from None
    if raw is not None and not isinstance(raw, dict):
        raise UsageError(f"{path} must hold a mapping")
    return ScenarioConfig.from_dict(raw or {}), path.parent
