"""Unified robot description model on top of SenML-style short labels.

A robot document is one JSON object::

    {"robotid": "rob-1",
     "ph": {"weight_g": 600},
     "sen": [{"sname": "light", "sval": "(0,100)", "su": "lux"}],
     "act": [{"aname": "kicking-arm", "aval": "(0,90)", "au": "deg"}],
     "info": [{"n": "vendor", "v": "lego"}],
     "behavioral": {"supported_tasks": ["fire-suppression"]},
     "dynamic": {"location": [0.0, 2.0], "battery_pct": 90.0, "state": "IDLE"},
     "interaction": {"protocol": "nxt-lcp", "endpoint": "sim://gw-nxt/rob-1"}}

Sensors and actuators also parse from positional arrays such as
``["kicking-arm", "(0,90)", "deg"]``; serialization always emits objects.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field, replace
from typing import Any, Iterable
from urllib.parse import urlsplit

from .errors import ParseError, RangeError, UsageError, Conflict, ValidationError

ROBOT_STATES = ("IDLE", "ASSIGNED", "EXECUTING", "FAILED", "OFFLINE")
BLOCK_ORDER = ("ph", "sen", "act", "info", "behavioral", "dynamic", "interaction")
TOP_LEVEL_LABELS = frozenset(("robotid",) + BLOCK_ORDER)
SENSOR_LABELS = ("sname", "sval", "su")
ACTUATOR_LABELS = ("aname", "aval", "au")
INFO_LABELS = ("n", "v")
BEHAVIORAL_LABELS = frozenset({"supported_tasks"})
DYNAMIC_LABELS = frozenset({"location", "battery_pct", "state"})
INTERACTION_LABELS = frozenset({"protocol", "endpoint"})

_ROBOT_ID_RE = re.compile(r"^[A-Za-z0-9._~-]+$")
_RANGE_RE = re.compile(r"^\(\s*([^,()]+?)\s*,\s*([^,()]+?)\s*\)$")

CapabilitySet = frozenset


def normalize_tag(tag: str) -> str:
    return tag.strip().lower()


def parse_range(text: str) -> tuple[float, float] | None:
    """Parse a ``"(min,max)"`` value range; empty text means no range."""
    if not text:
        return None
    m = _RANGE_RE.match(text.strip())
    if m is None:
        raise ValidationError(f"malformed value range {text!r}, expected (min,max)")
    try:
        lo, hi = float(m.group(1)), float(m.group(2))
    except ValueError:
        raise ValidationError(f"non-numeric value range {text!r}") from None
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValidationError(f"non-finite value range {text!r}")
    if lo > hi:
        raise RangeError(f"value range {text!r} has min > max")
    return lo, hi


@dataclass(frozen=True)
class SensorSpec:
    sname: str
    sval: str = ""
    su: str = ""

    def __post_init__(self):
        object.__setattr__(self, "sname", normalize_tag(self.sname))

    def value_range(self) -> tuple[float, float] | None:
        return parse_range(self.sval)


@dataclass(frozen=True)
class ActuatorSpec:
    aname: str
    aval: str = ""
    au: str = ""

    def __post_init__(self):
        object.__setattr__(self, "aname", normalize_tag(self.aname))

    def value_range(self) -> tuple[float, float] | None:
        return parse_range(self.aval)


@dataclass(frozen=True)
class StaticCharacteristics:
    # ph is kept as sorted (key, value) pairs so equality ignores input order
    physical: tuple[tuple[str, Any], ...] = ()
    sensors: tuple[SensorSpec, ...] = ()
    actuators: tuple[ActuatorSpec, ...] = ()
    info: tuple[tuple[str, Any], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "physical", tuple(sorted(tuple(p) for p in self.physical)))
        object.__setattr__(self, "sensors", tuple(self.sensors))
        object.__setattr__(self, "actuators", tuple(self.actuators))
        object.__setattr__(self, "info", tuple(tuple(p) for p in self.info))


@dataclass(frozen=True)
class BehavioralCharacteristics:
    supported_tasks: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "supported_tasks", tuple(normalize_tag(t) for t in self.supported_tasks))


@dataclass(frozen=True)
class DynamicCharacteristics:
    location: tuple[float, float] = (0.0, 0.0)
    battery_pct: float = 100.0
    state: str = "IDLE"

    def __post_init__(self):
        object.__setattr__(self, "location", tuple(float(c) for c in self.location))
        object.__setattr__(self, "battery_pct", float(self.battery_pct))


@dataclass(frozen=True)
class InteractionCharacteristics:
    protocol: str = ""
    endpoint: str = ""


@dataclass(frozen=True)
class RobotDescriptor:
    """One robot's static, behavioral, dynamic and interaction characteristics.

    ``robot_id`` may be empty for metadata that has not been published yet;
    the marketplace assigns one on publication.
    """

    robot_id: str = ""
    static_ch: StaticCharacteristics = field(default_factory=StaticCharacteristics)
    behavioral_ch: BehavioralCharacteristics = field(default_factory=BehavioralCharacteristics)
    dynamic_ch: DynamicCharacteristics = field(default_factory=DynamicCharacteristics)
    interaction_ch: InteractionCharacteristics = field(default_factory=InteractionCharacteristics)

    @property
    def sensors(self) -> tuple[SensorSpec, ...]:
        return self.static_ch.sensors

    @property
    def actuators(self) -> tuple[ActuatorSpec, ...]:
        return self.static_ch.actuators

    @property
    def state(self) -> str:
        return self.dynamic_ch.state

    @property
    def location(self) -> tuple[float, float]:
        return self.dynamic_ch.location

    @property
    def publishable(self) -> bool:
        return bool(capability_set(self))

    def with_id(self, robot_id: str) -> RobotDescriptor:
        return replace(self, robot_id=robot_id)

    def with_state(self, state: str) -> RobotDescriptor:
        return replace(self, dynamic_ch=replace(self.dynamic_ch, state=state))

    def with_location(self, location) -> RobotDescriptor:
        return replace(self, dynamic_ch=replace(self.dynamic_ch, location=tuple(location)))

    def sensor_names(self) -> frozenset[str]:
        return frozenset(s.sname for s in self.static_ch.sensors)

    def actuator_names(self) -> frozenset[str]:
        return frozenset(a.aname for a in self.static_ch.actuators)


@dataclass(frozen=True)
class CompositeDescriptor:
    """Result of merging member descriptors; the coalition-formation pattern."""

    members: tuple[str, ...]
    capabilities: frozenset[str]
    sensors: tuple[tuple[str, SensorSpec], ...]
    actuators: tuple[tuple[str, ActuatorSpec], ...]

    def to_dict(self) -> dict:
        return {
            "members": list(self.members),
            "capabilities": sorted(self.capabilities),
            "sen": [dict(_sensor_dict(s), robotid=rid) for rid, s in self.sensors],
            "act": [dict(_actuator_dict(a), robotid=rid) for rid, a in self.actuators],
        }


def capability_set(d: RobotDescriptor) -> frozenset[str]:
    tags = {s.sname for s in d.static_ch.sensors}
    tags.update(a.aname for a in d.static_ch.actuators)
    tags.update(d.behavioral_ch.supported_tasks)
    tags.discard("")
    return frozenset(tags)


# -- validation -------------------------------------------------------------

def _is_uri(text: str) -> bool:
    try:
        parts = urlsplit(text)
    except ValueError:
        return False
    if not parts.scheme or not re.match(r"^[A-Za-z][A-Za-z0-9+.-]*$", parts.scheme):
        return False
    return bool(parts.netloc or parts.path) and not any(c.isspace() for c in text)


def validate(d: RobotDescriptor) -> None:
    """Raise ValidationError for the first violated invariant."""
    if d.robot_id and not _ROBOT_ID_RE.match(d.robot_id):
        raise ValidationError(f"robot id {d.robot_id!r} is not URI-safe", "robotid")
    for s in d.static_ch.sensors:
        if not s.sname:
            raise ValidationError("sensor with empty sname", "sname")
        parse_range(s.sval)
    for a in d.static_ch.actuators:
        if not a.aname:
            raise ValidationError("actuator with empty aname", "aname")
        parse_range(a.aval)
    for key, _ in d.static_ch.physical:
        if not isinstance(key, str) or not key:
            raise ValidationError("physical property with empty key", "ph")
    for name, _ in d.static_ch.info:
        if not isinstance(name, str) or not name:
            raise ValidationError("info property with empty name", "info")
    if any(not t for t in d.behavioral_ch.supported_tasks):
        raise ValidationError("empty supported task tag", "supported_tasks")
    dyn = d.dynamic_ch
    if len(dyn.location) != 2 or not all(math.isfinite(c) for c in dyn.location):
        raise ValidationError(f"location {dyn.location!r} is not a finite (x, y) pair", "location")
    if not (0.0 <= dyn.battery_pct <= 100.0):
        raise ValidationError(f"battery_pct {dyn.battery_pct} outside [0, 100]", "battery_pct")
    if dyn.state not in ROBOT_STATES:
        raise ValidationError(f"unknown robot state {dyn.state!r}", "state")
    if d.interaction_ch.endpoint and not _is_uri(d.interaction_ch.endpoint):
        raise ValidationError(f"endpoint {d.interaction_ch.endpoint!r} is not a valid URI", "endpoint")


# -- wire format ------------------------------------------------------------

def _sensor_dict(s: SensorSpec) -> dict:
    return {"sname": s.sname, "sval": s.sval, "su": s.su}


def _actuator_dict(a: ActuatorSpec) -> dict:
    return {"aname": a.aname, "aval": a.aval, "au": a.au}


def to_document(d: RobotDescriptor) -> dict:
    """Descriptor as a JSON-ready dict (block order as in the canonical form)."""
    doc: dict[str, Any] = {}
    if d.robot_id:
        doc["robotid"] = d.robot_id
    doc["ph"] = dict(d.static_ch.physical)
    doc["sen"] = [_sensor_dict(s) for s in d.static_ch.sensors]
    doc["act"] = [_actuator_dict(a) for a in d.static_ch.actuators]
    doc["info"] = [{"n": n, "v": v} for n, v in d.static_ch.info]
    doc["behavioral"] = {"supported_tasks": list(d.behavioral_ch.supported_tasks)}
    doc["dynamic"] = {
        "location": list(d.dynamic_ch.location),
        "battery_pct": d.dynamic_ch.battery_pct,
        "state": d.dynamic_ch.state,
    }
    doc["interaction"] = {"protocol": d.interaction_ch.protocol, "endpoint": d.interaction_ch.endpoint}
    return doc


def _dump(value) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def serialize_descriptor(d: RobotDescriptor) -> str:
    validate(d)
    doc = to_document(d)
    return "{" + ",".join(f"{_dump(k)}:{_dump(v)}" for k, v in doc.items()) + "}"


def _entry(raw, labels: tuple[str, ...], block: str) -> dict:
    if isinstance(raw, list):
        if not 1 <= len(raw) <= len(labels):
            raise ValidationError(f"{block} entry {raw!r} has {len(raw)} fields", block)
        raw = dict(zip(labels, raw))
    if not isinstance(raw, dict):
        raise ValidationError(f"{block} entry must be an object or array", block)
    for key in raw:
        if key not in labels:
            raise ValidationError(f"unknown label {key!r} in {block} entry", key)
    for key, value in raw.items():
        if not isinstance(value, str):
            raise ValidationError(f"{key} must be a string", key)
    if labels[0] not in raw:
        raise ValidationError(f"{block} entry lacks {labels[0]!r}", labels[0])
    return raw


def _block(doc: dict, label: str, kind: type, default):
    value = doc.get(label, default)
    if not isinstance(value, kind):
        raise ValidationError(f"{label!r} must be {'an array' if kind is list else 'an object'}", label)
    return value


def _check_labels(block: dict, allowed: frozenset, name: str) -> None:
    for key in block:
        if key not in allowed:
            raise ValidationError(f"unknown label {key!r} in {name}", key)


def from_document(doc: Any) -> RobotDescriptor:
    """Build and validate a descriptor from an already-decoded JSON value."""
    if not isinstance(doc, dict):
        raise ValidationError("robot document must be a JSON object")
    for key in doc:
        if key not in TOP_LEVEL_LABELS:
            raise ValidationError(f"unknown label {key!r}", key)

    robot_id = doc.get("robotid", "")
    if not isinstance(robot_id, str):
        raise ValidationError("robotid must be a string", "robotid")

    ph = _block(doc, "ph", dict, {})
    sensors = [SensorSpec(**_entry(e, SENSOR_LABELS, "sen")) for e in _block(doc, "sen", list, [])]
    actuators = [ActuatorSpec(**_entry(e, ACTUATOR_LABELS, "act")) for e in _block(doc, "act", list, [])]
    info = []
    for e in _block(doc, "info", list, []):
        if not isinstance(e, dict) or "n" not in e:
            raise ValidationError("info entries must be objects with an 'n' name", "info")
        _check_labels(e, frozenset(INFO_LABELS), "info entry")
        info.append((e["n"], e.get("v", "")))

    beh = _block(doc, "behavioral", dict, {})
    _check_labels(beh, BEHAVIORAL_LABELS, "behavioral")
    tasks = beh.get("supported_tasks", [])
    if not isinstance(tasks, list) or not all(isinstance(t, str) for t in tasks):
        raise ValidationError("supported_tasks must be an array of strings", "supported_tasks")

    dyn = _block(doc, "dynamic", dict, {})
    _check_labels(dyn, DYNAMIC_LABELS, "dynamic")
    location = dyn.get("location", [0.0, 0.0])
    if (not isinstance(location, list) or len(location) != 2
            or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in location)):
        raise ValidationError("location must be an [x, y] array of numbers", "location")
    battery = dyn.get("battery_pct", 100.0)
    if not isinstance(battery, (int, float)) or isinstance(battery, bool):
        raise ValidationError("battery_pct must be a number", "battery_pct")
    state = dyn.get("state", "IDLE")

    inter = _block(doc, "interaction", dict, {})
    _check_labels(inter, INTERACTION_LABELS, "interaction")
    for key in ("protocol", "endpoint"):
        if not isinstance(inter.get(key, ""), str):
            raise ValidationError(f"{key} must be a string", key)

    d = RobotDescriptor(
        robot_id=robot_id,
        static_ch=StaticCharacteristics(tuple(ph.items()), tuple(sensors), tuple(actuators), tuple(info)),
        behavioral_ch=BehavioralCharacteristics(tuple(tasks)),
        dynamic_ch=DynamicCharacteristics(tuple(location), battery, state),
        interaction_ch=InteractionCharacteristics(inter.get("protocol", ""), inter.get("endpoint", "")),
    )
    validate(d)
    return d


def parse_descriptor(text: str | bytes) -> RobotDescriptor:
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError("document is not valid UTF-8", exc.start) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise ParseError(exc.msg, offset) from None
    return from_document(doc)


def merge_descriptors(ds: Iterable[RobotDescriptor]) -> CompositeDescriptor:
    ds = list(ds)
    if not ds:
        raise UsageError("cannot merge an empty list of descriptors")
    seen: set[str] = set()
    for d in ds:
        validate(d)
        if d.robot_id in seen:
            raise Conflict(f"robot {d.robot_id!r} appears twice in the merge list")
        seen.add(d.robot_id)
    caps: set[str] = set()
    for d in ds:
        caps |= capability_set(d)
    return CompositeDescriptor(
        members=tuple(d.robot_id for d in ds),
        capabilities=frozenset(caps),
        sensors=tuple((d.robot_id, s) for d in ds for s in d.static_ch.sensors),
        actuators=tuple((d.robot_id, a) for d in ds for a in d.static_ch.actuators),
    )


def digest(d: RobotDescriptor) -> str:
    return hashlib.sha256(serialize_descriptor(d).encode("utf-8")).hexdigest()
