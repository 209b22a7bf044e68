"""Scenario boot, the two delay experiments and the end-to-end task run."""

from __future__ import annotations

import asyncio
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Awaitable, Callable

from ..coalition import CostModel
from ..descriptor import from_document, parse_descriptor
from ..errors import IaaSError, TransportError, UsageError, error_from_body
from ..eventlog import EventLog
from ..iaas.backends import OverlayBackend, PresenceBackend
from ..iaas.model import PAAS, ServiceRequest, TaskSpec
from ..iaas.node import IaaSNode
from ..marketplace import PresenceServer
from ..overlay import OverlayNetwork
from ..transport import Request, Response, Router, SimTransport, SocketTransport, Transport, run_sim
from .config import ScenarioConfig
from .fleet import (
    FIRE_REMOTE_PENALTY, FIRE_SITE, FIRE_SUPPRESSION_CAPS, robot_type, tad_caps,
)

log = logging.getLogger(__name__)

ASSIGNMENT_TIMEOUT_MS = 600_000.0
# what the prototype's fire-suppression sub-task names explicitly
PROTOTYPE_CAPS = frozenset({"light", "kicking-arm", "movement-motor"})


@dataclass(frozen=True)
class MetricSample:
    metric: str  # IRDD | TAD
    scenario: str
    backend: str
    iaas_count: int
    rep: int
    value_ms: float

    def __post_init__(self):
        if self.value_ms < 0:
            raise ValueError("value_ms must be non-negative")


@dataclass
class Measurement:
    samples: list[MetricSample] = field(default_factory=list)
    censored: dict[tuple[str, int], int] = field(default_factory=dict)

    def censor(self, backend: str, iaas_count: int) -> None:
        key = (backend, iaas_count)
        self.censored[key] = self.censored.get(key, 0) + 1

    def extend(self, other: Measurement) -> None:
        self.samples.extend(other.samples)
        for key, n in other.censored.items():
            self.censored[key] = self.censored.get(key, 0) + n


class FrontDoor:
    """Static route table standing in for the NAT in front of the IaaS nodes."""

    def __init__(self, transport: Transport):
        self.transport = transport
        self.routes: dict[str, str] = {}
        self.uri = ""

    async def start(self, routes: dict[str, str]) -> str:
        self.routes = dict(routes)
        router = Router()
        router.add("POST", "/{iaas}/services/requests", self._forward)
        self.uri = await self.transport.serve("nat", router)
        return self.uri

    async def _forward(self, req: Request, iaas: str) -> Response:
        target = self.routes.get(iaas)
        if target is None:
            return Response(404, {"error": "NotFound", "message": f"no route to {iaas}"})
        return await self.transport.request("POST", target + "/services/requests", req.body)

    async def submit(self, iaas: str, request: dict) -> str:
        resp = await self.transport.request("POST", f"{self.uri}/{iaas}/services/requests", request)
        if not resp.ok:
            raise error_from_body(resp.status, resp.body)
        return resp.body["assignment_id"]


class Deployment:
    """A booted scenario: transport, marketplace or overlay, IaaS nodes, robots."""

    def __init__(self, config: ScenarioConfig, base_dir: Path | None = None):
        self.config = config
        self.base_dir = base_dir
        self.events = EventLog()
        self.transport: Transport | None = None
        self.marketplace: PresenceServer | None = None
        self.overlay: OverlayNetwork | None = None
        self.nodes: list[IaaSNode] = []
        self.front: FrontDoor | None = None
        self.robot_types: dict[str, str] = {}

    async def boot(self) -> Deployment:
        cfg = self.config
        if cfg.transport == "sim":
            self.transport = SimTransport(cfg.latency_ms, cfg.jitter_ms, cfg.seed)
        else:
            self.transport = SocketTransport()
        storage = Path(cfg.storage_dir) if cfg.storage_dir else None
        if cfg.backend == "presence":
            self.marketplace = PresenceServer(self.transport,
                                              storage_dir=storage / "marketplace" if storage else None)
            await self.marketplace.start()
        else:
            self.overlay = OverlayNetwork(self.transport, cfg.iaas_count, cfg.topology,
                                          d_proc_ms=cfg.d_proc_ms, seed=cfg.seed)
            await self.overlay.start()
        cost = CostModel(cfg.engagement, cfg.remote_penalty)
        for k in range(1, cfg.iaas_count + 1):
            if self.marketplace is not None:
                backend = PresenceBackend(self.marketplace.uri)
            else:
                backend = OverlayBackend(self.overlay, k)
            node = IaaSNode(self.transport, f"iaas{k}", backend,
                            storage_dir=storage / f"iaas{k}" if storage else None,
                            cost_model=cost, seed=cfg.seed, events=self.events)
            await node.start()
            self.nodes.append(node)
        for node, docs in zip(self.nodes, cfg.fleet_documents(self.base_dir)):
            for doc in docs:
                descriptor = from_document(doc) if isinstance(doc, dict) else parse_descriptor(doc)
                fault = float(cfg.faults.get(descriptor.interaction_ch.endpoint, 0.0))
                robot_id = await node.add_robot(descriptor, fault_p=fault)
                info = dict(descriptor.static_ch.info)
                self.robot_types[robot_id] = str(info.get("type", ""))
        self.front = FrontDoor(self.transport)
        await self.front.start({n.node_id: n.uri for n in self.nodes})
        await self.settle()
        return self

    async def settle(self) -> None:
        for _ in range(3):
            await self.transport.settle()
            for node in self.nodes:
                await node.backend.flush()
            if self.marketplace is None or self.marketplace.idle:
                if not self.transport.busy:
                    return
        await self.transport.settle()

    async def teardown(self) -> None:
        if self.transport is not None:
            await self.transport.close()

    def node(self, index: int) -> IaaSNode:
        return self.nodes[index - 1]

    def now_ms(self) -> float:
        return self.transport.now_ms()

    def robot_states(self) -> dict[str, str]:
        out = {}
        for node in self.nodes:
            for rid in node.repository.ids():
                out[rid] = node.repository.get(rid).state
        return out

    def marketplace_states(self) -> dict[str, str]:
        if self.marketplace is None:
            return {}
        return {rid: r.state for rid, r in sorted(self.marketplace.records.items())}

    def converged(self) -> bool:
        """Marketplace records equal each owner's repository at quiescence."""
        if self.marketplace is None:
            return True
        expected = {}
        for node in self.nodes:
            for rid in node.repository.ids():
                expected[rid] = (node.uri, node.repository.get(rid).descriptor)
        actual = {rid: (r.owner_iaas, r.descriptor) for rid, r in self.marketplace.records.items()}
        return expected == actual


def run_async(config: ScenarioConfig, main: Callable[[], Awaitable[Any]]) -> Any:
    """Run ``main`` on the virtual-time loop (sim) or a real asyncio loop (socket)."""
    if config.transport == "sim":
        return run_sim(main)
    return asyncio.run(main())


async def _with_deployment(config: ScenarioConfig, body, base_dir: Path | None = None):
    dep = Deployment(config, base_dir)
    try:
        await dep.boot()
        return await body(dep)
    finally:
        await dep.teardown()


def _request_body(iaas: int, caps, site, kind: str, duration_est: float = 1000.0,
                  request_id: str = "") -> dict:
    task = TaskSpec(request_id or "task", tuple(site), kind, duration_est)
    return ServiceRequest(request_id, frozenset(caps), task, PAAS).to_dict()


# -- run_scenario -------------------------------------------------------------

@dataclass
class RunReport:
    config: ScenarioConfig
    ok: bool = True
    cause: str = ""
    samples: list[MetricSample] = field(default_factory=list)
    events: EventLog = field(default_factory=EventLog)
    assignments: list[dict] = field(default_factory=list)
    marketplace_records: int = 0
    robot_states: dict[str, str] = field(default_factory=dict)
    wall_s: float = 0.0

    def summary(self) -> dict:
        return {"ok": self.ok, "cause": self.cause, "samples": len(self.samples),
                "events": len(self.events), "assignments": [
                    {"assignment_id": a["assignment_id"], "status": a["status"],
                     "members": [m["robotid"] for m in a["coalition"]["members"]]}
                    for a in self.assignments],
                "marketplace_records": self.marketplace_records, "robot_states": self.robot_states,
                "wall_s": round(self.wall_s, 3)}


def run_scenario(config: ScenarioConfig, base_dir: Path | None = None) -> RunReport:
    report = RunReport(config)
    t0 = time.perf_counter()

    async def body(dep: Deployment):
        report.events = dep.events
        start = dep.now_ms()
        pending = []
        for k, item in enumerate(config.script, start=1):
            wait = start + item.at_ms - dep.now_ms()
            if wait > 0:
                await dep.transport.sleep_ms(wait)
            req = _request_body(item.iaas, item.caps, item.site, item.kind, item.duration_est,
                                request_id=f"script-{k}")
            try:
                aid = await dep.front.submit(f"iaas{item.iaas}", req)
                pending.append((dep.node(item.iaas), aid))
            except IaaSError as exc:
                dep.events.record(dep.now_ms(), "harness", "request-rejected", request=k,
                                  error=type(exc).__name__, message=str(exc))
        for node, aid in pending:
            await node.wait_assignment(aid, ASSIGNMENT_TIMEOUT_MS)
        await dep.settle()
        for node, aid in pending:
            report.assignments.append(node.assignments[aid].to_dict())
        for node in dep.nodes:
            for k, entry in enumerate(node.tad):
                report.samples.append(MetricSample("TAD", "script", config.backend,
                                                   int(node.node_id[4:]), k, entry["tad_ms"]))
        report.marketplace_records = len(dep.marketplace.records) if dep.marketplace else 0
        report.robot_states = dep.robot_states()

    try:
        run_async(config, lambda: _with_deployment(config, body, base_dir))
    except (IaaSError, OSError, RuntimeError, asyncio.TimeoutError) as exc:
        report.ok = False
        report.cause = f"{type(exc).__name__}: {exc}"
    report.wall_s = time.perf_counter() - t0
    return report


# -- IRDD ---------------------------------------------------------------------

def measure_irdd(config: ScenarioConfig, counts=(2, 3, 4, 6, 8), backends=("presence", "overlay"),
                 reps: int | None = None) -> Measurement:
    """Discovery delay samples for every (backend, iaas_count)."""
    counts = list(counts)
    if not counts or min(counts) < 2:
        raise UsageError("IRDD sweeps need iaas counts of at least 2")
    reps = reps or config.reps
    out = Measurement()
    for backend in backends:
        for count in counts:
            cfg = config.with_(iaas_count=count, backend=backend, script=(), robots=None)
            out.extend(run_async(cfg, lambda cfg=cfg: _with_deployment(cfg, lambda dep: _irdd(dep, reps))))
    return out


async def _irdd(dep: Deployment, reps: int) -> Measurement:
    cfg = dep.config
    out = Measurement()
    probe = dep.node(1).backend
    for rep in range(reps):
        try:
            delay, _ = await probe.irdd_probe()
            out.samples.append(MetricSample("IRDD", f"irdd-{cfg.backend}-{cfg.iaas_count}",
                                            cfg.backend, cfg.iaas_count, rep, delay))
        except TransportError as exc:
            log.warning("IRDD sample censored: %s", exc)
            out.censor(cfg.backend, cfg.iaas_count)
        await dep.settle()
    return out


# -- TAD ----------------------------------------------------------------------

def measure_tad(config: ScenarioConfig, backends=("presence", "overlay"),
                reps: int | None = None) -> Measurement:
    """Send -> receive delay per receiving IaaS for a request spanning three remote hosts."""
    if config.iaas_count < 4:
        raise UsageError("TAD needs at least 4 IaaS so the coalition spans 3 remote hosts")
    reps = reps or config.reps
    out = Measurement()
    for backend in backends:
        cfg = config.with_(backend=backend, fleet="tad", robots=None, script=())
        out.extend(run_async(cfg, lambda cfg=cfg: _with_deployment(cfg, lambda dep: _tad(dep, reps))))
    return out


async def _tad(dep: Deployment, reps: int) -> Measurement:
    cfg = dep.config
    out = Measurement()
    origin = dep.node(1)
    caps = tad_caps(4)
    receivers = {dep.node(k).uri: k for k in range(2, cfg.iaas_count + 1)}
    for rep in range(reps):
        req = ServiceRequest(f"tad-{rep}", frozenset(caps), TaskSpec(f"tad-{rep}", (0.0, 0.0), "probe"))
        try:
            aid = await origin.handle_request(req)
            await origin.wait_assignment(aid, ASSIGNMENT_TIMEOUT_MS)
        except (IaaSError, asyncio.TimeoutError) as exc:
            log.warning("TAD rep %d censored: %s", rep, exc)
            for k in range(2, 5):
                out.censor(cfg.backend, k)
            await dep.settle()
            continue
        await dep.settle()
        for node in dep.nodes[1:]:
            for entry in node.tad:
                if entry["assignment_id"] == aid:
                    out.samples.append(MetricSample("TAD", f"tad-{cfg.backend}", cfg.backend,
                                                    receivers[node.uri], rep, entry["tad_ms"]))
    return out


def overlay_adjacent_tad(config: ScenarioConfig, reps: int = 10) -> list[float]:
    """Pipe delay between two adjacent overlay nodes on an otherwise quiet overlay."""
    cfg = config.with_(backend="overlay", script=())

    async def main():
        transport = SimTransport(cfg.latency_ms, cfg.jitter_ms, cfg.seed)
        net = OverlayNetwork(transport, max(cfg.iaas_count, 2), cfg.topology, cfg.d_proc_ms, seed=cfg.seed)
        await net.start()
        src = net.node(1)
        dst = src.neighbors[0]
        delays = []
        for _ in range(reps):
            result = await src.pipe_send(dst, {"kind": "probe"})
            delays.append(result.delay_ms)
            await transport.settle()
        await transport.close()
        return delays

    return run_sim(main)


# -- fire suppression ---------------------------------------------------------

@dataclass
class FireReport:
    ok: bool = True
    error: str = ""
    violations: list[str] = field(default_factory=list)
    request: dict = field(default_factory=dict)
    assignment: dict = field(default_factory=dict)
    coalition_types: list[str] = field(default_factory=list)
    frames: list[str] = field(default_factory=list)
    robot_events: list[dict] = field(default_factory=list)
    robot_states: dict[str, str] = field(default_factory=dict)
    marketplace_states: dict[str, str] = field(default_factory=dict)
    converged: bool = False
    replans: int = 0
    events: EventLog = field(default_factory=EventLog)

    def to_dict(self) -> dict:
        return {"ok": self.ok, "error": self.error, "violations": self.violations,
                "request": self.request, "assignment": self.assignment,
                "coalition_types": self.coalition_types, "frames": self.frames,
                "robot_events": self.robot_events, "robot_states": self.robot_states,
                "marketplace_states": self.marketplace_states, "converged": self.converged,
                "replans": self.replans}


def run_fire_suppression(config: ScenarioConfig | None = None, without: tuple[str, ...] = (),
                         fault_types: dict[str, float] | None = None,
                         fault_endpoints: dict[str, float] | None = None,
                         caps=FIRE_SUPPRESSION_CAPS) -> FireReport:
    """Submit the fire-suppression request at IaaS1 and audit the whole run.

    ``without`` drops robot types from the fleet; ``fault_types`` and
    ``fault_endpoints`` inject per-task failure probabilities.
    """
    from .fleet import default_fleet

    config = config or ScenarioConfig(remote_penalty=FIRE_REMOTE_PENALTY)
    fleet = default_fleet(config.iaas_count, without)
    faults = dict(config.faults)
    for row in fleet:
        for doc in row:
            p = (fault_types or {}).get(robot_type(doc))
            if p is not None:
                faults[doc["interaction"]["endpoint"]] = p
    faults.update(fault_endpoints or {})
    config = config.with_(robots=tuple(tuple(r) for r in fleet), faults=faults, script=(),
                          backend="presence")
    expect_failure = bool(faults) and any(p > 0 for p in faults.values())
    report = FireReport()
    report.request = _request_body(1, caps, FIRE_SITE, "fire-suppression", request_id="fire-1")

    async def body(dep: Deployment):
        report.events = dep.events
        try:
            aid = await dep.front.submit("iaas1", report.request)
        except IaaSError as exc:
            report.ok = False
            report.error = f"{type(exc).__name__}: {exc}"
            return
        origin = dep.node(1)
        await origin.wait_assignment(aid, ASSIGNMENT_TIMEOUT_MS)
        await dep.settle()
        assignment = origin.assignments[aid]
        report.assignment = assignment.to_dict()
        report.replans = assignment.replans
        report.coalition_types = sorted({dep.robot_types[m.robot_id] for m in assignment.coalition.members})
        members = assignment.member_ids()
        for node in dep.nodes:
            for _, rid, line in node.gateways.wire_log():
                if rid in members:
                    report.frames.append(line)
        report.robot_events = [e for e in dep.events.entries if e["kind"] == "robot-event"]
        report.robot_states = dep.robot_states()
        report.marketplace_states = dep.marketplace_states()
        report.converged = dep.converged()
        report.violations = _audit(report, assignment, expect_failure, set(caps))

    try:
        run_async(config, lambda: _with_deployment(config, body))
    except (IaaSError, OSError, RuntimeError, asyncio.TimeoutError) as exc:
        report.ok = False
        report.error = f"{type(exc).__name__}: {exc}"
    if report.violations:
        report.ok = False
    return report


def _audit(report: FireReport, assignment, expect_failure: bool, caps: set[str]) -> list[str]:
    violations = []
    composite = assignment.composite
    if composite is None or not caps <= composite.capabilities:
        violations.append("capability-soundness")
    if not report.converged:
        violations.append("marketplace-convergence")
    if expect_failure:
        if assignment.replans > 1:
            violations.append("replan-once")
        return violations
    if PROTOTYPE_CAPS <= caps and set(report.coalition_types) != {"arms", "light"}:
        violations.append("both-robot-types")
    if assignment.status != "DONE":
        violations.append("assignment-done")
    if any(state != "IDLE" for state in report.robot_states.values()):
        violations.append("all-idle")
    return violations
