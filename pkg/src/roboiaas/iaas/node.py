"""One IaaS-for-Robots node.

The node owns a local robots repository, a gateway manager bound to its
simulated robots, and a backend for publication, discovery and federation.
A service request runs discover -> form coalition -> compose -> delegate;
robot events flow back through the gateways into the robot monitor, which
releases leases, republishes state and closes or re-plans the assignment.

REST surface::

    POST   /admin/robots                 add a robot from its metadata document
    DELETE /admin/robots/{robotid}       remove an idle robot
    POST   /services/requests            submit a ServiceRequest
    GET    /services/requests/{id}       assignment status
    POST   /federation/tasks             sub-task delegated by a peer IaaS
    POST   /federation/events            completion callback from a peer IaaS
    POST   /gateways/{protocol}          ensure a gateway instance
"""

from __future__ import annotations

import asyncio
import itertools
import logging
from dataclasses import dataclass, field

from ..coalition import EXACT_LIMIT, Candidate, Coalition, CostModel, form_coalition
from ..descriptor import (
    CompositeDescriptor, RobotDescriptor, capability_set, from_document, merge_descriptors,
    parse_descriptor, validate,
)
from ..errors import (
    Busy, IaaSError, LeaseConflict, NotFound, RoutingError, Unsatisfiable, UsageError,
    error_from_body,
)
from ..eventlog import EventLog
from ..gateway import Command, GatewayManager, RobotWireEvent, SimRobot
from ..transport import Request, Response, Router, Transport
from .backends import Backend
from .model import PAAS, PEER_IAAS, ServiceRequest, SubTask, TaskAssignment, TaskSpec
from .repository import RobotsRepository

log = logging.getLogger(__name__)

MOVEMENT_TAG = "movement-motor"


@dataclass
class Discovery:
    candidates: list[Candidate]
    degraded: bool = False
    rounds: int = 0

    def available(self) -> list[Candidate]:
        return [c for c in self.candidates if c.available]


@dataclass
class HostedTask:
    """A sub-task this node executes on behalf of a peer IaaS."""
    origin_uri: str
    assignment_id: str
    subtask_id: str
    robot_id: str
    lease_key: str
    sensed: dict = field(default_factory=dict)


def task_commands(descriptor: RobotDescriptor, tags, site) -> list[Command]:
    """Command list for one member: move to the site, then actuate and sense."""
    tags = sorted(set(tags))
    sensors = descriptor.sensor_names()
    cmds = []
    if MOVEMENT_TAG in tags:
        cmds.append(Command.move(*site))
    for tag in tags:
        if tag == MOVEMENT_TAG:
            continue
        cmds.append(Command.sense(tag) if tag in sensors else Command.actuate(tag))
    return cmds


def _admits(state: str, wanted, sensors) -> bool:
    """Idle robots take any sub-task; busy ones only sensor-only (shared) work."""
    if state == "IDLE":
        return True
    return state in ("ASSIGNED", "EXECUTING") and bool(wanted) and set(wanted) <= set(sensors)


class IaaSNode:
    def __init__(self, transport: Transport, node_id: str, backend: Backend,
                 storage_dir=None, cost_model: CostModel | None = None,
                 exact_limit: int = EXACT_LIMIT, seed: int = 0, events: EventLog | None = None,
                 drain_ms: float = 2000.0):
        self.transport = transport
        self.node_id = node_id
        self.backend = backend
        self.uri = ""
        self.cost_model = cost_model or CostModel()
        self.exact_limit = exact_limit
        self.seed = seed
        self.events = events if events is not None else EventLog()
        self.repository = RobotsRepository(storage_dir)
        self.gateways = GatewayManager(self.on_robot_event, drain_ms=drain_ms, name=f"{node_id}-gw")
        self.robots: dict[str, SimRobot] = {}
        self.assignments: dict[str, TaskAssignment] = {}
        self.hosted: dict[str, HostedTask] = {}
        self.local_tasks: dict[str, tuple[str, str]] = {}
        self.requests: set[str] = set()
        self.tad: list[dict] = []
        self.federation_messages = 0
        self._assign_seq = itertools.count(1)
        self._req_seq = itertools.count(1)
        self._done_waiters: dict[str, asyncio.Event] = {}
        self._locks: dict[str, asyncio.Lock] = {}
        self.router = self._build_router()

    async def start(self) -> str:
        self.uri = await self.transport.serve(self.node_id, self.router)
        await self.backend.start(self)
        return self.uri

    def _now(self) -> float:
        return self.transport.now_ms()

    def _log(self, kind: str, **fields) -> None:
        self.events.record(self._now(), self.node_id, kind, **fields)

    # -- O&M manager ----------------------------------------------------------

    async def add_robot(self, metadata, fault_p: float = 0.0) -> str:
        if isinstance(metadata, RobotDescriptor):
            descriptor = metadata
        elif isinstance(metadata, dict):
            descriptor = from_document(metadata)
        else:
            descriptor = parse_descriptor(metadata)
        validate(descriptor)
        self.repository.check_new(descriptor)
        robot_id = await self.backend.publish(descriptor)
        descriptor = descriptor.with_id(robot_id).with_state("IDLE")
        try:
            self.repository.add(descriptor)
            robot = SimRobot(descriptor, fail_p=fault_p, seed=self.seed)
            self.gateways.attach(robot)
        except IaaSError:
            # another add raced us while the publication was in flight
            self.repository.entries.pop(robot_id, None)
            await self.backend.remove(robot_id)
            raise
        self.robots[robot_id] = robot
        self._log("robot-added", robotid=robot_id)
        return robot_id

    async def remove_robot(self, robot_id: str) -> None:
        entry = self.repository.get(robot_id)
        live = [a.assignment_id for a in self.assignments.values()
                if a.live and any(st.robot_id == robot_id and st.status not in ("DONE", "FAILED")
                                  for st in a.subtasks)]
        if entry.holders() or live:
            raise Busy(f"robot {robot_id} is part of a live assignment")
        if any(h.robot_id == robot_id for h in self.hosted.values()):
            raise Busy(f"robot {robot_id} is executing a federated sub-task")
        await self.backend.remove(robot_id)
        self.repository.remove(robot_id)
        self.gateways.detach(robot_id)
        self.robots.pop(robot_id, None)
        self._log("robot-removed", robotid=robot_id)

    def _republish(self, robot_id: str, state: str | None = None) -> None:
        if state is not None:
            self.repository.set_state(robot_id, state)
        self.backend.update(self.repository.get(robot_id).descriptor)

    # -- discovery engine -----------------------------------------------------

    def _local_candidates(self, required: frozenset[str]) -> list[Candidate]:
        out = []
        for robot_id in self.repository.ids():
            entry = self.repository.get(robot_id)
            caps = capability_set(entry.descriptor)
            if required and not caps & required:
                continue
            wanted = caps & required if required else caps
            available = (_admits(entry.state, wanted, entry.sensor_tags)
                         and self.repository.can_lease(robot_id, wanted, ""))
            out.append(Candidate(robot_id, self.uri, caps, entry.descriptor.location, False,
                                 available, entry.state, entry.descriptor))
        return out

    async def discover(self, required_caps=()) -> Discovery:
        """Local repository matches plus the cached remote presence state."""
        required = frozenset(required_caps)
        local = self._local_candidates(required)
        view = await self.backend.remote_view(sorted(required))
        remote = []
        local_ids = {c.robot_id for c in local}
        for r in view.robots:
            caps = capability_set(r.descriptor)
            if r.robot_id in local_ids or (required and not caps & required):
                continue
            wanted = caps & required if required else caps
            remote.append(Candidate(r.robot_id, r.owner_iaas, caps, r.descriptor.location, True,
                                    _admits(r.state, wanted, r.descriptor.sensor_names()),
                                    r.state, r.descriptor))
        # available first, idle robots ahead of busy ones shared by sensor
        candidates = sorted(local + remote, key=lambda c: (not c.available, c.state != "IDLE", c.robot_id))
        if view.degraded:
            log.warning("%s: marketplace unreachable, discovery is local-only", self.node_id)
        return Discovery(candidates, view.degraded, view.rounds)

    # -- virtualization and composition engines -------------------------------

    def form_coalition(self, candidates, required_caps, task: TaskSpec) -> Coalition:
        return form_coalition(candidates, required_caps, task.site, self.cost_model, self.exact_limit)

    def compose(self, services) -> CompositeDescriptor:
        return merge_descriptors(services)

    # -- request handler ------------------------------------------------------

    async def handle_request(self, req: ServiceRequest) -> str:
        if not req.request_id:
            req = ServiceRequest(f"{self.node_id}-req-{next(self._req_seq)}", req.required_caps,
                                 req.task, req.origin, req.origin_uri)
        if req.request_id in self.requests:
            raise UsageError(f"request id {req.request_id} was already used on this node")
        self.requests.add(req.request_id)
        self._log("request", request_id=req.request_id, caps=sorted(req.required_caps),
                  origin=req.origin)
        required = req.required_caps
        local = [c for c in self._local_candidates(required) if c.available]
        fast = [c for c in local if required <= c.capabilities]
        if fast:
            coalition = self.form_coalition(fast, required, req.task)
            discovery_rounds = None
        else:
            found = await self.discover(required)
            coalition = self.form_coalition(found.available(), required, req.task)
            discovery_rounds = found.rounds
        return await self.submit_coalition(req, coalition, discovery_rounds)

    async def submit_coalition(self, req: ServiceRequest, coalition: Coalition,
                               discovery_rounds: int | None = None) -> str:
        """Record an assignment for an already formed coalition and delegate it."""
        assignment = TaskAssignment(f"{self.node_id}-a{next(self._assign_seq)}", req, coalition)
        assignment.composite = coalition.pattern
        assignment.history.append({"event": "formed", "members": list(coalition.robot_ids),
                                   "cost": coalition.cost, "discovery_rounds": discovery_rounds})
        self.assignments[assignment.assignment_id] = assignment
        self._done_waiters[assignment.assignment_id] = asyncio.Event()
        self._log("coalition", assignment_id=assignment.assignment_id,
                  members=[m.to_dict() for m in coalition.members], cost=round(coalition.cost, 9),
                  method=coalition.method)
        await self.delegate(assignment, coalition)
        return assignment.assignment_id

    async def wait_assignment(self, assignment_id: str, timeout_ms: float | None = None) -> TaskAssignment:
        event = self._done_waiters[assignment_id]
        if timeout_ms is None:
            await event.wait()
        else:
            await asyncio.wait_for(event.wait(), timeout_ms / 1000.0)
        return self.assignments[assignment_id]

    # -- task delegator -------------------------------------------------------

    def _build_subtasks(self, assignment: TaskAssignment, coalition: Coalition) -> list[SubTask]:
        out = []
        base = len(assignment.subtasks)
        for k, member in enumerate(coalition.members, start=base + 1):
            descriptor = self._descriptor_of(member.robot_id, coalition)
            cmds = task_commands(descriptor, member.tags, assignment.request.task.site)
            out.append(SubTask(f"{assignment.assignment_id}-s{k}", member.robot_id, member.owner_iaas,
                               member.tags, [c.to_list() for c in cmds], member.remote))
        return out

    def _descriptor_of(self, robot_id: str, coalition: Coalition) -> RobotDescriptor:
        if robot_id in self.repository:
            return self.repository.get(robot_id).descriptor
        d = self._remote_descriptors.get(robot_id)
        if d is None:
            raise NotFound(f"no descriptor known for {robot_id}")
        return d

    @property
    def _remote_descriptors(self) -> dict[str, RobotDescriptor]:
        cache = getattr(self.backend, "cache", None)
        if cache is not None:
            return {rid: r.descriptor for rid, r in cache.items()}
        out = {}
        ov = getattr(self.backend, "overlay_node", None)
        if ov is not None:
            for rid, adv in ov.fresh_cache().items():
                out[rid] = from_document(adv.descriptor).with_id(rid)
        return out

    async def delegate(self, assignment: TaskAssignment, coalition: Coalition | None = None) -> None:
        """Lease local members, send local sub-tasks to gateways and remote ones to peers."""
        coalition = coalition or assignment.coalition
        subtasks = self._build_subtasks(assignment, coalition)
        key = assignment.assignment_id
        acquired = []
        try:
            for st in subtasks:
                if not st.remote:
                    self.repository.acquire(key, st.robot_id, st.tags)
                    acquired.append(st.robot_id)
        except IaaSError as exc:
            for rid in acquired:
                self.repository.release(key, rid)
            if not assignment.subtasks:
                assignment.status = "FAILED"
                assignment.history.append({"event": "aborted", "reason": str(exc)})
                self._log("assignment", assignment_id=key, status="ABORTED", reason=str(exc))
                self._finish(assignment)
            raise LeaseConflict(str(exc)) from None
        assignment.subtasks.extend(subtasks)
        remote = []
        for st in subtasks:
            if st.remote:
                remote.append(st)
            else:
                self._send_local(assignment, st)
        if remote:
            await asyncio.gather(*(self._send_remote(assignment, st) for st in remote))
        self._check_done(assignment)

    def _send_local(self, assignment: TaskAssignment, st: SubTask) -> None:
        self._republish(st.robot_id, "EXECUTING")
        self.local_tasks[st.subtask_id] = (assignment.assignment_id, st.subtask_id)
        try:
            self.gateways.translate_and_send(st.robot_id, st.subtask_id, st.commands)
        except RoutingError as exc:
            self.repository.release(assignment.assignment_id, st.robot_id)
            self.local_tasks.pop(st.subtask_id, None)
            self._member_failed(assignment, st, f"routing:{exc}")
            return
        st.advance("SENT")
        st.advance("RUNNING")
        self._log("gateway-send", assignment_id=assignment.assignment_id, subtask_id=st.subtask_id,
                  robotid=st.robot_id, frames=len(st.commands))

    async def _send_remote(self, assignment: TaskAssignment, st: SubTask) -> None:
        sent = self._now()
        body = {"origin": self.uri, "assignment_id": assignment.assignment_id,
                "subtask_id": st.subtask_id, "robotid": st.robot_id, "tags": list(st.tags),
                "commands": st.commands, "sent_ms": sent}
        st.advance("SENT")
        self.federation_messages += 1
        self._log("federation-send", assignment_id=assignment.assignment_id,
                  subtask_id=st.subtask_id, robotid=st.robot_id, to=st.owner_iaas)
        try:
            resp = await self.backend.federate(st.owner_iaas, "/federation/tasks", body)
            if not resp.ok:
                raise error_from_body(resp.status, resp.body)
        except IaaSError as exc:
            if st.status not in ("DONE", "FAILED"):
                self._member_failed(assignment, st, f"rejected:{type(exc).__name__}")
            return
        if st.status == "SENT":
            st.advance("RUNNING")

    # -- federation endpoints -------------------------------------------------

    def accept_federated(self, body: dict) -> dict:
        received = self._now()
        robot_id = body["robotid"]
        lease_key = f"{body['origin']}#{body['assignment_id']}"
        self.tad.append({"assignment_id": body["assignment_id"], "subtask_id": body["subtask_id"],
                         "origin": body["origin"], "receiver": self.uri, "node": self.node_id,
                         "sent_ms": body["sent_ms"], "received_ms": received,
                         "tad_ms": received - body["sent_ms"]})
        self._log("federation-recv", assignment_id=body["assignment_id"],
                  subtask_id=body["subtask_id"], robotid=robot_id)
        entry = self.repository.get(robot_id)
        if entry.state != "IDLE" and not set(body["tags"]) <= entry.sensor_tags:
            raise LeaseConflict(f"robot {robot_id} is {entry.state}")
        self.repository.acquire(lease_key, robot_id, body["tags"])
        self.hosted[body["subtask_id"]] = HostedTask(body["origin"], body["assignment_id"],
                                                     body["subtask_id"], robot_id, lease_key)
        self._republish(robot_id, "EXECUTING")
        try:
            self.gateways.translate_and_send(robot_id, body["subtask_id"], body["commands"])
        except RoutingError:
            self.hosted.pop(body["subtask_id"], None)
            self.repository.release(lease_key, robot_id)
            self._settle_robot_state(robot_id)
            raise
        return {"accepted": True, "received_ms": received}

    def on_federated_event(self, body: dict) -> dict:
        assignment = self.assignments.get(body["assignment_id"])
        if assignment is None:
            raise NotFound(f"unknown assignment {body['assignment_id']}")
        st = assignment.subtask(body["subtask_id"])
        if st is None:
            raise NotFound(f"unknown sub-task {body['subtask_id']}")
        self._subtask_event(assignment, st, body["event"], body.get("reason", ""),
                            body.get("sensed", {}))
        return {"ok": True}

    # -- robot monitor --------------------------------------------------------

    def on_robot_event(self, robot_id: str, ev: RobotWireEvent) -> None:
        if robot_id not in self.repository:
            log.warning("%s: event for unknown robot %s dropped", self.node_id, robot_id)
            return
        self._log("robot-event", robotid=robot_id, task=ev.task_id, event=ev.kind, tag=ev.tag,
                  value=ev.value, reason=ev.reason)
        if ev.task_id in self.local_tasks:
            assignment_id, subtask_id = self.local_tasks[ev.task_id]
            assignment = self.assignments[assignment_id]
            st = assignment.subtask(subtask_id)
            if ev.kind == "SENSED":
                st.sensed[ev.tag] = ev.value
                return
            del self.local_tasks[ev.task_id]
            self.repository.release(assignment_id, robot_id)
            self._after_terminal(robot_id, ev)
            self._subtask_event(assignment, st, "DONE" if ev.kind == "DONE" else "FAILED", ev.reason, {})
            return
        hosted = self.hosted.get(ev.task_id)
        if hosted is None:
            log.warning("%s: event for unknown task %s dropped", self.node_id, ev.task_id)
            return
        if ev.kind == "SENSED":
            hosted.sensed[ev.tag] = ev.value
            return
        del self.hosted[ev.task_id]
        self.repository.release(hosted.lease_key, robot_id)
        self._after_terminal(robot_id, ev)
        body = {"assignment_id": hosted.assignment_id, "subtask_id": hosted.subtask_id,
                "robotid": robot_id, "event": "DONE" if ev.kind == "DONE" else "FAILED",
                "reason": ev.reason, "sensed": hosted.sensed}
        self.transport.spawn(self._callback(hosted.origin_uri, body), name=f"callback:{ev.task_id}")

    async def _callback(self, origin_uri: str, body: dict) -> None:
        try:
            resp = await self.backend.federate(origin_uri, "/federation/events", body)
            if not resp.ok:
                log.warning("%s: origin rejected event: %s", self.node_id, resp.body)
        except IaaSError as exc:
            log.warning("%s: event callback to %s lost: %s", self.node_id, origin_uri, exc)

    def _after_terminal(self, robot_id: str, ev: RobotWireEvent) -> None:
        robot = self.robots.get(robot_id)
        if robot is not None:
            entry = self.repository.get(robot_id)
            entry.descriptor = entry.descriptor.with_location(robot.position)
        if ev.kind == "FAIL" and robot is not None and robot.state == "FAILED":
            self._republish(robot_id, "FAILED")
            return
        self._settle_robot_state(robot_id)

    def _settle_robot_state(self, robot_id: str) -> None:
        entry = self.repository.get(robot_id)
        if entry.state == "FAILED":
            self._republish(robot_id)
            return
        state = "EXECUTING" if entry.holders() else "IDLE"
        self._republish(robot_id, state)

    def reset_robot(self, robot_id: str) -> None:
        """Operator reset of a FAILED robot back to IDLE."""
        robot = self.robots[robot_id]
        robot.reset(self._now())
        self._republish(robot_id, "IDLE")

    # -- assignment state machine ----------------------------------------------

    def _subtask_event(self, assignment: TaskAssignment, st: SubTask, kind: str, reason: str,
                       sensed: dict) -> None:
        st.sensed.update(sensed or {})
        if st.status in ("DONE", "FAILED"):
            return
        if kind == "DONE":
            while st.status != "RUNNING":
                st.advance({"PENDING": "SENT", "SENT": "RUNNING"}[st.status])
            st.advance("DONE")
            self._log("subtask", assignment_id=assignment.assignment_id, subtask_id=st.subtask_id,
                      status="DONE", sensed=st.sensed)
            self._check_done(assignment)
            return
        self._member_failed(assignment, st, reason or "failed")

    def _member_failed(self, assignment: TaskAssignment, st: SubTask, reason: str) -> None:
        st.advance("FAILED", reason)
        self._log("subtask", assignment_id=assignment.assignment_id, subtask_id=st.subtask_id,
                  status="FAILED", reason=reason)
        if not assignment.live:
            return
        if assignment.replans >= 1:
            self._fail(assignment, f"{st.subtask_id} failed after re-planning: {reason}")
            return
        assignment.replans += 1
        self.transport.spawn(self._replan(assignment, st), name=f"replan:{assignment.assignment_id}")

    async def _replan(self, assignment: TaskAssignment, failed: SubTask) -> None:
        lock = self._locks.setdefault(assignment.assignment_id, asyncio.Lock())
        async with lock:
            # gather every failed member not yet covered by a replacement
            lost = [st for st in assignment.subtasks if st.status == "FAILED"
                    and not st.covered]
            tags = frozenset(t for st in lost for t in st.tags)
            exclude = assignment.member_ids()
            assignment.history.append({"event": "replan", "tags": sorted(tags),
                                       "excluded": sorted(exclude)})
            self._log("replan", assignment_id=assignment.assignment_id, tags=sorted(tags))
            try:
                found = await self.discover(tags)
                pool = [c for c in found.available() if c.robot_id not in exclude]
                coalition = self.form_coalition(pool, tags, assignment.request.task)
            except Unsatisfiable as exc:
                self._fail(assignment, f"re-plan unsatisfiable: missing {list(exc.missing)}")
                return
            for st in lost:
                st.covered = True
            assignment.history.append({"event": "replanned", "members": list(coalition.robot_ids)})
            try:
                await self.delegate(assignment, coalition)
            except LeaseConflict as exc:
                self._fail(assignment, f"re-plan lease conflict: {exc}")

    def _fail(self, assignment: TaskAssignment, reason: str) -> None:
        if not assignment.live:
            return
        assignment.status = "FAILED"
        assignment.history.append({"event": "failed", "reason": reason})
        self._log("assignment", assignment_id=assignment.assignment_id, status="FAILED", reason=reason)
        self._finish(assignment)

    def _check_done(self, assignment: TaskAssignment) -> None:
        if not assignment.live:
            return
        active = [st for st in assignment.subtasks if not st.covered]
        if active and all(st.status == "DONE" for st in active):
            assignment.status = "DONE"
            assignment.history.append({"event": "done"})
            self._log("assignment", assignment_id=assignment.assignment_id, status="DONE")
            self._finish(assignment)

    def _finish(self, assignment: TaskAssignment) -> None:
        event = self._done_waiters.get(assignment.assignment_id)
        if event is not None:
            event.set()

    # -- quiescence -----------------------------------------------------------

    def idle(self) -> bool:
        return (not self.local_tasks and not self.hosted and self.backend._queue.empty()
                and all(not a.live for a in self.assignments.values()))

    def live_leases(self) -> list[tuple[str, str, str, bool]]:
        return self.repository.leases()

    # -- REST binding ---------------------------------------------------------

    def _build_router(self) -> Router:
        r = Router()
        r.add("POST", "/admin/robots", self._post_admin_robot)
        r.add("DELETE", "/admin/robots/{robotid}", self._delete_admin_robot)
        r.add("POST", "/services/requests", self._post_request)
        r.add("GET", "/services/requests/{assignment_id}", self._get_request)
        r.add("POST", "/federation/tasks", lambda req: Response(202, self.accept_federated(req.body)))
        r.add("POST", "/federation/events", lambda req: self.on_federated_event(req.body))
        r.add("POST", "/gateways/{protocol}", self._post_gateway)
        return r

    async def _post_admin_robot(self, req: Request):
        fault_p = float(req.query.get("fault_p", 0.0))
        robot_id = await self.add_robot(req.body, fault_p=fault_p)
        return Response(201, {"robotid": robot_id})

    async def _delete_admin_robot(self, req: Request, robotid: str):
        await self.remove_robot(robotid)
        return {"robotid": robotid, "removed": True}

    async def _post_request(self, req: Request):
        body = dict(req.body or {})
        if body.get("origin") == PEER_IAAS and not body.get("origin_uri"):
            raise UsageError("peer requests must carry origin_uri")
        assignment_id = await self.handle_request(ServiceRequest.from_dict(body))
        return Response(202, {"assignment_id": assignment_id})

    def _get_request(self, req: Request, assignment_id: str):
        assignment = self.assignments.get(assignment_id)
        if assignment is None:
            raise NotFound(f"unknown assignment {assignment_id}")
        return assignment.to_dict()

    def _post_gateway(self, req: Request, protocol: str):
        gw = self.gateways.ensure_gateway(protocol)
        return Response(201, {"gateway_id": gw.gateway_id, "state": gw.state,
                              "robots": gw.robot_ids})


__all__ = ["IaaSNode", "Discovery", "task_commands", "PAAS", "PEER_IAAS"]
