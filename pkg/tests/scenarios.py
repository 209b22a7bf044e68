"""Scenario drivers shared by the module tests and the acceptance suite."""

from __future__ import annotations

import asyncio
import random
from collections import Counter
from pathlib import Path

from helpers import robot_doc
from roboiaas.coalition import Coalition, CoalitionMember, CostModel
from roboiaas.descriptor import from_document
from roboiaas.errors import LeaseConflict
from roboiaas.iaas.backends import PresenceBackend
from roboiaas.iaas.model import ServiceRequest, TaskSpec
from roboiaas.iaas.node import IaaSNode
from roboiaas.marketplace import PresenceServer
from roboiaas.transport import Router, SimTransport, run_sim

OWNER = "sim://iaas1"


class Watcher:
    """A callback endpoint that records every notification it receives."""

    def __init__(self, transport, name):
        self.name = name
        self.got: list[tuple[str, str, int, str, bool]] = []
        self.transport = transport
        self.uri = ""

    async def start(self):
        r = Router()
        r.add("POST", "/notify", self._on)
        base = await self.transport.serve(self.name, r)
        self.uri = base + "/notify"
        return self

    def _on(self, req):
        for n in req.body["notifications"]:
            self.got.append((req.body["subscriberid"], n["robotid"], n["version"], n["state"],
                             "descriptor" in n))
        return {"ok": True}


async def boot_marketplace(n_watchers=1, latency=5.0, jitter=0.1, seed=0):
    t = SimTransport(latency, jitter, seed)
    server = PresenceServer(t)
    await server.start()
    watchers = [await Watcher(t, f"w{k}").start() for k in range(n_watchers)]
    return t, server, watchers


async def boot_cluster(fleets, latency=5.0, jitter=0.1, seed=0, cost_model=None, storage: Path | None = None,
                       faults=None):
    """Marketplace plus one presence-backed node per entry of ``fleets``."""
    t = SimTransport(latency, jitter, seed)
    server = PresenceServer(t)
    await server.start()
    nodes = []
    for k, docs in enumerate(fleets, start=1):
        node = IaaSNode(t, f"iaas{k}", PresenceBackend(server.uri),
                        storage_dir=storage / f"iaas{k}" if storage else None,
                        cost_model=cost_model or CostModel(), seed=seed)
        await node.start()
        nodes.append(node)
        for doc in docs:
            await node.add_robot(doc, fault_p=(faults or {}).get(doc["interaction"]["endpoint"], 0.0))
    await settle(t, server, nodes)
    return t, server, nodes


async def settle(t, server, nodes):
    for _ in range(4):
        await t.settle()
        for n in nodes:
            await n.backend.flush()
        if server.idle and not t.busy:
            break
    await t.settle()


# -- randomized protocol fuzz ---------------------------------------------------------

class PresenceOracle:
    """Independent model of who must be told what, replayed from the operations."""

    def __init__(self):
        self.robots: dict[str, list] = {}  # robot id -> [version, state]
        self.subs: dict[str, tuple[str, str]] = {}  # sub id -> (scope, uri)
        self.expected: Counter = Counter()

    def _tell(self, sub_id, robot_id):
        version, state = self.robots[robot_id]
        self.expected[(self.subs[sub_id][1], sub_id, robot_id, version, state)] += 1

    def _matching(self, robot_id):
        return [s for s, (scope, _) in self.subs.items() if scope in ("*", robot_id)]

    def publish(self, robot_id):
        self.robots[robot_id] = [1, "IDLE"]
        for s in self._matching(robot_id):
            self._tell(s, robot_id)

    def republish(self, robot_id, state):
        rec = self.robots[robot_id]
        changed = rec[1] != state
        rec[0] += 1
        rec[1] = state
        if changed:
            for s in self._matching(robot_id):
                self._tell(s, robot_id)

    def remove(self, robot_id):
        self.robots[robot_id][0] += 1
        self.robots[robot_id][1] = "OFFLINE"
        for s in self._matching(robot_id):
            self._tell(s, robot_id)
        del self.robots[robot_id]
        for s in [s for s, (scope, _) in self.subs.items() if scope == robot_id]:
            del self.subs[s]

    def subscribe(self, sub_id, scope, uri, created):
        if not created:
            return
        self.subs[sub_id] = (scope, uri)
        for rid in self.robots:
            if scope in ("*", rid):
                self._tell(sub_id, rid)

    def unsubscribe(self, sub_id):
        del self.subs[sub_id]


def run_presence_fuzz(ops: int = 1000, seed: int = 7, watchers: int = 4):
    rng = random.Random(seed)

    async def main():
        t, server, ws = await boot_marketplace(watchers, latency=5.0, jitter=2.0, seed=seed)
        oracle = PresenceOracle()
        for _ in range(ops):
            live = sorted(oracle.robots)
            subs = sorted(oracle.subs)
            roll = rng.random()
            if roll < 0.2 or not live:
                d = from_document(robot_doc(f"nxt://h/{rng.random()}", actuators=["winch"]))
                oracle.publish(server.publish_robot(d, OWNER).robot_id)
            elif roll < 0.5:
                rid = rng.choice(live)
                state = rng.choice(["IDLE", "ASSIGNED", "EXECUTING", "FAILED"])
                server.republish(rid, OWNER, state=state)
                oracle.republish(rid, state)
            elif roll < 0.58:
                rid = rng.choice(live)
                server.remove_robot(rid, OWNER)
                oracle.remove(rid)
            elif roll < 0.78:
                uri = rng.choice(ws).uri
                if rng.random() < 0.5:
                    sub, created = server.subscribe_all(uri)
                    oracle.subscribe(sub.subscriber_id, "*", uri, created)
                else:
                    rid = rng.choice(live)
                    sub, created = server.subscribe(rid, uri)
                    oracle.subscribe(sub.subscriber_id, rid, uri, created)
            elif subs:
                sid = rng.choice(subs)
                scope = oracle.subs[sid][0]
                if scope == "*":
                    server.unsubscribe_all(sid)
                else:
                    server.unsubscribe(scope, sid)
                oracle.unsubscribe(sid)
            # let deliveries interleave with the next operations
            if rng.random() < 0.3:
                await t.sleep_ms(rng.uniform(0, 12))
        await t.settle()
        got = Counter()
        for w in ws:
            for sub_id, rid, version, state, _ in w.got:
                got[(w.uri, sub_id, rid, version, state)] += 1
        # per subscription, each robot's versions arrive strictly increasing
        order_ok = True
        for w in ws:
            last: dict[tuple[str, str], int] = {}
            for sub_id, rid, version, _, _ in w.got:
                if version <= last.get((sub_id, rid), 0):
                    order_ok = False
                last[(sub_id, rid)] = version
        return oracle.expected, got, order_ok

    return run_sim(main)




# -- concurrent lease fuzz ------------------------------------------------------------

LEASE_FLEET = [
    robot_doc("nxt://fz/a", sensors=["light", "camera"], actuators=["kicking-arm", "movement-motor"]),
    robot_doc("nxt://fz/b", sensors=["sonar"], actuators=["gripper-arm", "movement-motor"]),
    robot_doc("nxt://fz/c", sensors=["light"], actuators=["winch"]),
    robot_doc("nxt://fz/d", sensors=["camera", "microphone"], actuators=["drill"]),
]


def run_lease_fuzz(attempts: int = 500, seed: int = 3, window_ms: float = 20_000.0):
    """Fire ``attempts`` assignment attempts at random instants against one node.

    Each attempt names one robot and a random subset of its capabilities.  The
    returned record lets the caller check, from the outside, that no two
    admitted attempts held the same (robot, actuator tag) over overlapping
    intervals and that sensor-only attempts were never refused.
    """
    rng = random.Random(seed)

    async def main():
        t, server, (node,) = await boot_cluster([LEASE_FLEET], seed=seed)
        robots = node.repository.ids()
        plan = []
        for k in range(attempts):
            rid = rng.choice(robots)
            d = node.repository.get(rid).descriptor
            sensors = sorted(d.sensor_names())
            caps = sorted(d.sensor_names() | d.actuator_names())
            if rng.random() < 0.35:
                tags = rng.sample(sensors, rng.randint(1, len(sensors)))
            else:
                tags = rng.sample(caps, rng.randint(1, len(caps)))
            plan.append((rng.uniform(0, window_ms), k, rid, tuple(sorted(tags)), set(sensors)))
        plan.sort()
        held: list[tuple[str, str, float, float, int]] = []  # robot, tag, start, end, attempt
        refused_sensor_only = []
        outcomes = Counter()
        start = t.now_ms()

        async def attempt(at, k, rid, tags, sensors):
            await t.sleep_ms(start + at - t.now_ms())
            req = ServiceRequest(f"fz-{k}", frozenset(tags), TaskSpec(f"fz-{k}"))
            coalition = Coalition((CoalitionMember(rid, node.uri, tags),), 0.0)
            sensor_only = set(tags) <= sensors
            try:
                aid = await node.submit_coalition(req, coalition)
            except LeaseConflict:
                outcomes["refused"] += 1
                if sensor_only:
                    refused_sensor_only.append(k)
                return
            begin = t.now_ms()
            a = await node.wait_assignment(aid)
            outcomes[a.status] += 1
            outcomes["sensor-only" if sensor_only else "actuating"] += 1
            for tag in tags:
                if tag not in sensors:
                    held.append((rid, tag, begin, t.now_ms(), k))

        await asyncio.gather(*(attempt(*p) for p in plan))
        await settle(t, server, [node])
        overlaps = []
        by_key: dict[tuple[str, str], list] = {}
        for rid, tag, s, e, k in held:
            by_key.setdefault((rid, tag), []).append((s, e, k))
        for key, spans in by_key.items():
            spans.sort()
            for (s1, e1, k1), (s2, e2, k2) in zip(spans, spans[1:]):
                if s2 < e1:
                    overlaps.append((key, k1, k2))
        return {"outcomes": outcomes, "overlaps": overlaps, "refused_sensor_only": refused_sensor_only,
                "leases_left": node.live_leases(), "states": {r: node.repository.get(r).state for r in robots}}

    return run_sim(main)
