"""Request, task and assignment records of an IaaS node."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

from ..coalition import Coalition
from ..descriptor import CompositeDescriptor, normalize_tag
from ..errors import UsageError

PAAS = "PAAS"
PEER_IAAS = "PEER_IAAS"

SUBTASK_STATES = ("PENDING", "SENT", "RUNNING", "DONE", "FAILED")
TERMINAL = frozenset({"DONE", "FAILED"})
_NEXT = {"PENDING": "SENT", "SENT": "RUNNING", "RUNNING": "DONE"}


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    site: tuple[float, float] = (0.0, 0.0)
    kind: str = "generic"
    duration_est: float = 1000.0

    def __post_init__(self):
        if not all(math.isfinite(float(v)) for v in self.site):
            raise UsageError("task site coordinates must be finite")
        if not self.duration_est > 0:
            raise UsageError("duration_est must be positive")
        object.__setattr__(self, "site", (float(self.site[0]), float(self.site[1])))

    def to_dict(self) -> dict:
        return {"task_id": self.task_id, "site": list(self.site), "kind": self.kind,
                "duration_est": self.duration_est}

    @classmethod
    def from_dict(cls, raw: dict) -> TaskSpec:
        return cls(raw.get("task_id", ""), tuple(raw.get("site", (0.0, 0.0))),
                   raw.get("kind", "generic"), float(raw.get("duration_est", 1000.0)))


@dataclass(frozen=True)
class ServiceRequest:
    request_id: str
    required_caps: frozenset[str]
    task: TaskSpec
    origin: str = PAAS
    origin_uri: str = ""

    def __post_init__(self):
        caps = frozenset(normalize_tag(c) for c in self.required_caps)
        if not caps:
            raise UsageError("a service request needs at least one required capability")
        if self.origin not in (PAAS, PEER_IAAS):
            raise UsageError(f"unknown request origin {self.origin!r}")
        object.__setattr__(self, "required_caps", caps)

    def to_dict(self) -> dict:
        return {"request_id": self.request_id, "required_caps": sorted(self.required_caps),
                "task": self.task.to_dict(), "origin": self.origin, "origin_uri": self.origin_uri}

    @classmethod
    def from_dict(cls, raw: dict) -> ServiceRequest:
        if not isinstance(raw, dict):
            raise UsageError("service request body must be a JSON object")
        return cls(raw.get("request_id", ""), frozenset(raw.get("required_caps", ())),
                   TaskSpec.from_dict(raw.get("task", {})), raw.get("origin", PAAS),
                   raw.get("origin_uri", ""))


@dataclass
class SubTask:
    subtask_id: str
    robot_id: str
    owner_iaas: str
    tags: tuple[str, ...]
    commands: list[list[Any]]
    remote: bool = False
    status: str = "PENDING"
    reason: str = ""
    sensed: dict[str, float] = field(default_factory=dict)
    # set once a re-plan has found replacements for this failed member
    covered: bool = False
    history: list[str] = field(default_factory=lambda: ["PENDING"])

    def advance(self, status: str, reason: str = "") -> None:
        """Move along PENDING -> SENT -> RUNNING -> DONE; FAILED from any live state."""
        if self.status in TERMINAL:
            raise UsageError(f"sub-task {self.subtask_id} is already {self.status}")
        if status == "FAILED" or _NEXT.get(self.status) == status:
            self.status = status
            self.reason = reason
            self.history.append(status)
            return
        raise UsageError(f"illegal sub-task transition {self.status} -> {status}")

    def to_dict(self) -> dict:
        return {"subtask_id": self.subtask_id, "robotid": self.robot_id, "owner": self.owner_iaas,
                "tags": list(self.tags), "commands": self.commands, "remote": self.remote,
                "status": self.status, "reason": self.reason, "sensed": self.sensed,
                "covered": self.covered}


@dataclass
class TaskAssignment:
    assignment_id: str
    request: ServiceRequest
    coalition: Coalition
    subtasks: list[SubTask] = field(default_factory=list)
    composite: CompositeDescriptor | None = None
    status: str = "RUNNING"  # RUNNING | DONE | FAILED
    replans: int = 0
    history: list[dict] = field(default_factory=list)

    @property
    def live(self) -> bool:
        return self.status == "RUNNING"

    def subtask(self, subtask_id: str) -> SubTask | None:
        for st in self.subtasks:
            if st.subtask_id == subtask_id:
                return st
        return None

    def member_ids(self) -> set[str]:
        return {st.robot_id for st in self.subtasks}

    def to_dict(self) -> dict:
        return {
            "assignment_id": self.assignment_id,
            "request": self.request.to_dict(),
            "status": self.status,
            "replans": self.replans,
            "coalition": self.coalition.to_dict(),
            "composite": self.composite.to_dict() if self.composite else None,
            "subtasks": [st.to_dict() for st in self.subtasks],
            "history": self.history,
        }
