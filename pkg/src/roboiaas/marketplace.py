"""Robots Services Marketplace: a presence server for robot presentities.

REST surface (publication interface)::

    POST   /robots                                publish a new robot
    POST   /robots?fromuri={subscriberuri}        subscribe to every robot
    POST   /robots/{robotid}?fromuri={uri}        subscribe to one robot
    PUT    /robots/{robotid}                      re-publish (state change)
    DELETE /robots/{robotid}/{subscriberid}       unsubscribe from one robot
    DELETE /robots/{subscriberid}                 unsubscribe from the list

Extensions: ``DELETE /robots/{robotid}?owner={iaasuri}`` removes a robot and
``GET /robots?caps=a,b&state=IDLE`` queries without subscribing.  Robot ids
start with ``rob-`` and subscriber ids with ``sub-``, which is how the two
single-segment DELETE forms are told apart.

Notifications are pushed as ``POST {fromuri}`` with a body
``{"subscriberid": ..., "notifications": [...]}``.  Every watcher URI has its
own FIFO outbox, so a watcher sees each robot's versions in order.
"""

from __future__ import annotations

import asyncio
import logging
from dataclasses import dataclass, field
from pathlib import Path
from urllib.parse import urlsplit

from .descriptor import (
    ROBOT_STATES, TOP_LEVEL_LABELS, RobotDescriptor, capability_set, digest, from_document,
    normalize_tag, serialize_descriptor, to_document,
)
from .errors import Conflict, Forbidden, NotFound, TransportError, UsageError, ValidationError
from .transport import Request, Response, Router, Transport

log = logging.getLogger(__name__)

ALL = "*"
ROBOT_PREFIX = "rob-"
SUBSCRIBER_PREFIX = "sub-"


@dataclass
class PresenceRecord:
    robot_id: str
    owner_iaas: str
    descriptor: RobotDescriptor
    state: str
    version: int
    updated_at: float

    def to_dict(self) -> dict:
        return {
            "robotid": self.robot_id,
            "owner": self.owner_iaas,
            "state": self.state,
            "version": self.version,
            "updated_at": self.updated_at,
            "descriptor": to_document(self.descriptor),
        }


@dataclass
class Subscription:
    subscriber_id: str
    subscriber_uri: str
    scope: str
    created_at: float
    # robots whose full descriptor this watcher already holds, with its digest
    sent: dict[str, str] = field(default_factory=dict)

    def matches(self, robot_id: str) -> bool:
        return self.scope == ALL or self.scope == robot_id


class PresenceServer:
    def __init__(self, transport: Transport, name: str = "marketplace",
                 storage_dir: str | Path | None = None, notify_timeout_ms: float | None = None):
        self.transport = transport
        self.name = name
        self.uri = ""
        self.storage_dir = Path(storage_dir) if storage_dir else None
        if self.storage_dir:
            self.storage_dir.mkdir(parents=True, exist_ok=True)
        self.notify_timeout_ms = notify_timeout_ms
        self.records: dict[str, PresenceRecord] = {}
        self.subscriptions: dict[str, Subscription] = {}
        self.op_log: list[dict] = []
        self.delivery_failures = 0
        self.pending_notifications = 0
        self._robot_seq = 0
        self._sub_seq = 0
        self._outboxes: dict[str, asyncio.Queue] = {}
        self.router = self._build_router()

    async def start(self) -> str:
        self.uri = await self.transport.serve(self.name, self.router)
        return self.uri

    # -- operations ---------------------------------------------------------

    def _now(self) -> float:
        return self.transport.now_ms()

    def _new_robot_id(self) -> str:
        while True:
            self._robot_seq += 1
            robot_id = f"{ROBOT_PREFIX}{self._robot_seq}"
            if robot_id not in self.records:
                return robot_id

    def publish_robot(self, descriptor: RobotDescriptor, owner: str) -> PresenceRecord:
        if not owner:
            raise UsageError("publication requires the owner IaaS uri")
        if not descriptor.publishable:
            raise ValidationError("descriptor has an empty capability set and cannot be published", "sen")
        robot_id = descriptor.robot_id
        if robot_id:
            if not robot_id.startswith(ROBOT_PREFIX):
                raise ValidationError(f"robot ids must start with {ROBOT_PREFIX!r}", "robotid")
            if robot_id in self.records:
                raise Conflict(f"robot {robot_id} is already published")
        else:
            robot_id = self._new_robot_id()
        record = PresenceRecord(robot_id, owner, descriptor.with_id(robot_id).with_state("IDLE"),
                                "IDLE", 1, self._now())
        self.records[robot_id] = record
        self._persist(record)
        self.op_log.append({"op": "publish", "robotid": robot_id, "version": 1, "state": "IDLE",
                            "digest": digest(record.descriptor)})
        self._fan_out(record)
        return record

    def republish(self, robot_id: str, owner: str, state: str | None = None,
                  descriptor: RobotDescriptor | None = None,
                  expected_version: int | None = None) -> PresenceRecord:
        record = self._record(robot_id)
        if owner != record.owner_iaas:
            raise Forbidden(f"{owner or 'anonymous caller'} does not own {robot_id}")
        if expected_version is not None and expected_version != record.version:
            raise Conflict(f"stale version {expected_version}, current is {record.version}")
        new_desc = record.descriptor
        if descriptor is not None:
            if descriptor.robot_id and descriptor.robot_id != robot_id:
                raise ValidationError("descriptor robotid does not match the resource", "robotid")
            new_desc = descriptor.with_id(robot_id)
            if state is None:
                state = new_desc.state
        if state is None:
            raise UsageError("re-publication needs a state or a descriptor")
        if state not in ROBOT_STATES:
            raise ValidationError(f"unknown robot state {state!r}", "state")
        new_desc = new_desc.with_state(state)
        changed = state != record.state or new_desc != record.descriptor
        record.descriptor = new_desc
        record.state = state
        record.version += 1
        record.updated_at = self._now()
        self._persist(record)
        self.op_log.append({"op": "republish", "robotid": robot_id, "version": record.version,
                            "state": state, "digest": digest(new_desc)})
        if changed:
            self._fan_out(record)
        return record

    def remove_robot(self, robot_id: str, owner: str) -> None:
        record = self._record(robot_id)
        if owner != record.owner_iaas:
            raise Forbidden(f"{owner or 'anonymous caller'} does not own {robot_id}")
        record.state = "OFFLINE"
        record.descriptor = record.descriptor.with_state("OFFLINE")
        record.version += 1
        record.updated_at = self._now()
        self.op_log.append({"op": "remove", "robotid": robot_id, "version": record.version,
                            "state": "OFFLINE", "digest": digest(record.descriptor)})
        self._fan_out(record)
        del self.records[robot_id]
        for sub_id in [s.subscriber_id for s in self.subscriptions.values() if s.scope == robot_id]:
            del self.subscriptions[sub_id]
        if self.storage_dir:
            (self.storage_dir / f"{robot_id}.robot.senml.json").unlink(missing_ok=True)

    def subscribe(self, robot_id: str, fromuri: str) -> tuple[Subscription, bool]:
        self._record(robot_id)
        return self._subscribe(robot_id, fromuri)

    def subscribe_all(self, fromuri: str) -> tuple[Subscription, bool]:
        return self._subscribe(ALL, fromuri)

    def _subscribe(self, scope: str, fromuri: str) -> tuple[Subscription, bool]:
        if not _valid_callback(fromuri):
            raise UsageError(f"fromuri {fromuri!r} is not a valid callback uri")
        for sub in self.subscriptions.values():
            if sub.scope == scope and sub.subscriber_uri == fromuri:
                return sub, False
        self._sub_seq += 1
        sub = Subscription(f"{SUBSCRIBER_PREFIX}{self._sub_seq}", fromuri, scope, self._now())
        self.subscriptions[sub.subscriber_id] = sub
        self.op_log.append({"op": "subscribe", "subscriberid": sub.subscriber_id, "scope": scope,
                            "fromuri": fromuri})
        # initial snapshot: one delivery carrying every matching presentity
        snapshot = [self._notification(sub, r) for _, r in sorted(self.records.items()) if sub.matches(r.robot_id)]
        self._enqueue(sub, snapshot)
        return sub, True

    def unsubscribe(self, robot_id: str, subscriber_id: str) -> None:
        sub = self.subscriptions.get(subscriber_id)
        if sub is None or sub.scope != robot_id:
            raise NotFound(f"no subscription {subscriber_id} on {robot_id}")
        self._drop(sub)

    def unsubscribe_all(self, subscriber_id: str) -> None:
        sub = self.subscriptions.get(subscriber_id)
        if sub is None:
            raise NotFound(f"no subscription {subscriber_id}")
        self._drop(sub)

    def _drop(self, sub: Subscription) -> None:
        del self.subscriptions[sub.subscriber_id]
        self.op_log.append({"op": "unsubscribe", "subscriberid": sub.subscriber_id})

    def query_robots(self, caps=None, state: str | None = None) -> list[PresenceRecord]:
        wanted = {normalize_tag(c) for c in (caps or ()) if c.strip()}
        out = []
        for robot_id in sorted(self.records):
            record = self.records[robot_id]
            if state is not None and record.state != state:
                continue
            if wanted and not wanted <= capability_set(record.descriptor):
                continue
            out.append(record)
        return out

    def _record(self, robot_id: str) -> PresenceRecord:
        record = self.records.get(robot_id)
        if record is None:
            raise NotFound(f"unknown robot {robot_id}")
        return record

    def _persist(self, record: PresenceRecord) -> None:
        if self.storage_dir:
            path = self.storage_dir / f"{record.robot_id}.robot.senml.json"
            path.write_text(serialize_descriptor(record.descriptor) + "\n", encoding="utf-8")

    # -- notification fan-out ------------------------------------------------

    def _notification(self, sub: Subscription, record: PresenceRecord) -> dict:
        note = {"robotid": record.robot_id, "owner": record.owner_iaas,
                "state": record.state, "version": record.version}
        d = digest(record.descriptor.with_state("IDLE"))
        if sub.sent.get(record.robot_id) != d:
            note["descriptor"] = to_document(record.descriptor)
            sub.sent[record.robot_id] = d
        return note

    def _fan_out(self, record: PresenceRecord) -> None:
        for sub_id in sorted(self.subscriptions, key=_seq_key):
            sub = self.subscriptions[sub_id]
            if sub.matches(record.robot_id):
                self._enqueue(sub, [self._notification(sub, record)])

    def _enqueue(self, sub: Subscription, notes: list[dict]) -> None:
        box = self._outboxes.get(sub.subscriber_uri)
        if box is None:
            box = self._outboxes[sub.subscriber_uri] = asyncio.Queue()
            self.transport.spawn(self._deliver(sub.subscriber_uri, box),
                                 name=f"notify:{sub.subscriber_uri}", daemon=True)
        box.put_nowait({"subscriberid": sub.subscriber_id, "notifications": notes})
        self.pending_notifications += 1

    async def _deliver(self, uri: str, box: asyncio.Queue) -> None:
        while True:
            body = await box.get()
            try:
                resp = await self.transport.request("POST", uri, body, timeout_ms=self.notify_timeout_ms)
                if not resp.ok:
                    self.delivery_failures += 1
                    log.warning("watcher %s rejected notification: %s", uri, resp.status)
            except TransportError as exc:
                self.delivery_failures += 1
                log.warning("notification to %s lost: %s", uri, exc)
            finally:
                self.pending_notifications -= 1

    @property
    def idle(self) -> bool:
        return self.pending_notifications == 0

    # -- REST binding --------------------------------------------------------

    def _build_router(self) -> Router:
        r = Router()
        r.add("POST", "/robots", self._post_robots)
        r.add("GET", "/robots", self._get_robots)
        r.add("POST", "/robots/{robotid}", self._post_robot)
        r.add("PUT", "/robots/{robotid}", self._put_robot)
        r.add("DELETE", "/robots/{robotid}/{subscriberid}", self._delete_subscription)
        r.add("DELETE", "/robots/{ident}", self._delete_single)
        return r

    def _post_robots(self, req: Request):
        if "fromuri" in req.query:
            sub, created = self.subscribe_all(req.query["fromuri"])
            return Response(201 if created else 200, {"subscriberid": sub.subscriber_id})
        record = self.publish_robot(from_document(req.body), req.query.get("owner", ""))
        return Response(201, {"robotid": record.robot_id, "version": record.version})

    def _post_robot(self, req: Request, robotid: str):
        if "fromuri" not in req.query:
            raise UsageError("subscription requires the fromuri query parameter")
        sub, created = self.subscribe(robotid, req.query["fromuri"])
        return Response(201 if created else 200, {"subscriberid": sub.subscriber_id})

    def _put_robot(self, req: Request, robotid: str):
        body = req.body if isinstance(req.body, dict) else {}
        expected = req.query.get("version")
        expected = int(expected) if expected not in (None, "") else None
        owner = req.query.get("owner", "")
        if "state" in body and not set(body) & (TOP_LEVEL_LABELS - {"robotid"}):
            record = self.republish(robotid, owner, state=body["state"], expected_version=expected)
        else:
            record = self.republish(robotid, owner, descriptor=from_document(body), expected_version=expected)
        return {"robotid": robotid, "version": record.version}

    def _delete_subscription(self, req: Request, robotid: str, subscriberid: str):
        self.unsubscribe(robotid, subscriberid)
        return {"subscriberid": subscriberid}

    def _delete_single(self, req: Request, ident: str):
        if ident.startswith(SUBSCRIBER_PREFIX):
            self.unsubscribe_all(ident)
            return {"subscriberid": ident}
        if ident.startswith(ROBOT_PREFIX):
            self.remove_robot(ident, req.query.get("owner", ""))
            return {"robotid": ident, "removed": True}
        raise NotFound(f"{ident!r} is neither a robot nor a subscriber id")

    def _get_robots(self, req: Request):
        caps = [c for c in req.query.get("caps", "").split(",") if c.strip()]
        return [r.to_dict() for r in self.query_robots(caps, req.query.get("state") or None)]


def _seq_key(ident: str) -> tuple[int, str]:
    tail = ident.rsplit("-", 1)[-1]
    return (int(tail), ident) if tail.isdigit() else (1 << 60, ident)


def _valid_callback(uri: str) -> bool:
    parts = urlsplit(uri)
    return bool(parts.scheme and parts.netloc)
