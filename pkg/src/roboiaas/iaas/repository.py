"""Local robots repository with node-level virtualization leases.

Each robot entry carries its descriptor, a local availability state and a
lease table.  Sensor tags may be leased by any number of assignments at
once; every other capability tag (actuators, supported tasks) is held by at
most one assignment.  All mutations are synchronous, so on an asyncio loop
each one is atomic.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from ..descriptor import ROBOT_STATES, RobotDescriptor, capability_set, parse_descriptor, serialize_descriptor
from ..errors import Busy, Conflict, LeaseConflict, NotFound, UsageError

log = logging.getLogger(__name__)

SUFFIX = ".robot.senml.json"


@dataclass
class RepoEntry:
    descriptor: RobotDescriptor
    state: str = "IDLE"
    # exclusive tag -> assignment key
    exclusive: dict[str, str] = field(default_factory=dict)
    # sensor tag -> assignment keys sharing it
    shared: dict[str, Counter] = field(default_factory=dict)

    @property
    def sensor_tags(self) -> frozenset[str]:
        return self.descriptor.sensor_names()

    def holders(self) -> set[str]:
        keys = set(self.exclusive.values())
        for c in self.shared.values():
            keys.update(k for k, n in c.items() if n > 0)
        return keys

    def sensor_lease_count(self, tag: str) -> int:
        return sum(self.shared.get(tag, Counter()).values())


class RobotsRepository:
    def __init__(self, storage_dir: str | Path | None = None):
        self.storage_dir = Path(storage_dir) if storage_dir else None
        if self.storage_dir:
            self.storage_dir.mkdir(parents=True, exist_ok=True)
        self.entries: dict[str, RepoEntry] = {}

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, robot_id: str) -> bool:
        return robot_id in self.entries

    def ids(self) -> list[str]:
        return sorted(self.entries)

    def get(self, robot_id: str) -> RepoEntry:
        entry = self.entries.get(robot_id)
        if entry is None:
            raise NotFound(f"robot {robot_id} is not in this repository")
        return entry

    def find_endpoint(self, endpoint: str) -> str | None:
        if not endpoint:
            return None
        for robot_id, entry in self.entries.items():
            if entry.descriptor.interaction_ch.endpoint == endpoint:
                return robot_id
        return None

    def check_new(self, descriptor: RobotDescriptor) -> None:
        if descriptor.robot_id and descriptor.robot_id in self.entries:
            raise Conflict(f"robot {descriptor.robot_id} is already in the repository")
        dup = self.find_endpoint(descriptor.interaction_ch.endpoint)
        if dup:
            raise Conflict(f"endpoint {descriptor.interaction_ch.endpoint} already belongs to {dup}")

    def add(self, descriptor: RobotDescriptor) -> RepoEntry:
        if not descriptor.robot_id:
            raise UsageError("repository entries need a robot id")
        self.check_new(descriptor)
        entry = RepoEntry(descriptor.with_state("IDLE"))
        self.entries[descriptor.robot_id] = entry
        self._persist(entry)
        return entry

    def remove(self, robot_id: str) -> RobotDescriptor:
        entry = self.get(robot_id)
        if entry.holders():
            raise Busy(f"robot {robot_id} is leased by {sorted(entry.holders())}")
        del self.entries[robot_id]
        if self.storage_dir:
            (self.storage_dir / f"{robot_id}{SUFFIX}").unlink(missing_ok=True)
        return entry.descriptor

    def set_state(self, robot_id: str, state: str) -> RobotDescriptor:
        if state not in ROBOT_STATES:
            raise UsageError(f"unknown robot state {state!r}")
        entry = self.get(robot_id)
        entry.state = state
        entry.descriptor = entry.descriptor.with_state(state)
        self._persist(entry)
        return entry.descriptor

    def _persist(self, entry: RepoEntry) -> None:
        if self.storage_dir:
            path = self.storage_dir / f"{entry.descriptor.robot_id}{SUFFIX}"
            path.write_text(serialize_descriptor(entry.descriptor) + "\n", encoding="utf-8")

    def load_disk(self) -> dict[str, RobotDescriptor]:
        """Descriptors as persisted on disk, keyed by robot id."""
        if not self.storage_dir:
            return {}
        out = {}
        for path in sorted(self.storage_dir.glob(f"*{SUFFIX}")):
            d = parse_descriptor(path.read_bytes())
            out[d.robot_id] = d
        return out

    # -- leases ---------------------------------------------------------------

    def can_lease(self, robot_id: str, tags, key: str) -> bool:
        entry = self.entries.get(robot_id)
        if entry is None or entry.state in ("FAILED", "OFFLINE"):
            return False
        for tag in tags:
            if tag in entry.sensor_tags:
                continue
            holder = entry.exclusive.get(tag)
            if holder is not None and holder != key:
                return False
        return True

    def acquire(self, key: str, robot_id: str, tags) -> None:
        """Lease ``tags`` on ``robot_id`` for assignment ``key``, all or nothing."""
        entry = self.get(robot_id)
        tags = sorted(set(tags))
        unknown = set(tags) - capability_set(entry.descriptor)
        if unknown:
            raise UsageError(f"robot {robot_id} has no capability {sorted(unknown)}")
        if entry.state in ("FAILED", "OFFLINE"):
            raise LeaseConflict(f"robot {robot_id} is {entry.state}")
        for tag in tags:
            if tag in entry.sensor_tags:
                continue
            holder = entry.exclusive.get(tag)
            if holder is not None and holder != key:
                raise LeaseConflict(f"{robot_id}/{tag} is leased by {holder}")
        for tag in tags:
            if tag in entry.sensor_tags:
                entry.shared.setdefault(tag, Counter())[key] += 1
            else:
                entry.exclusive[tag] = key

    def release(self, key: str, robot_id: str | None = None) -> None:
        targets = [robot_id] if robot_id else list(self.entries)
        for rid in targets:
            entry = self.entries.get(rid)
            if entry is None:
                continue
            for tag in [t for t, k in entry.exclusive.items() if k == key]:
                del entry.exclusive[tag]
            for tag, counter in list(entry.shared.items()):
                counter.pop(key, None)
                if not counter:
                    del entry.shared[tag]

    def leases(self) -> list[tuple[str, str, str, bool]]:
        """Flat snapshot ``(robot_id, tag, key, exclusive)`` of every live lease."""
        out = []
        for rid in sorted(self.entries):
            entry = self.entries[rid]
            for tag, key in sorted(entry.exclusive.items()):
                out.append((rid, tag, key, True))
            for tag, counter in sorted(entry.shared.items()):
                for key, n in sorted(counter.items()):
                    out.extend((rid, tag, key, False) for _ in range(n))
        return out
