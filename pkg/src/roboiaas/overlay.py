"""Peer-to-peer overlay used as the comparison baseline.

One overlay node per IaaS.  Publication floods advertisements to every
reachable node, discovery floods a query whose responses travel back along
the reverse path, and task assignment rides on source-routed pipes.  Every
message costs one link traversal (``L + jitter``) per hop and ``d_proc`` of
processing at each node it reaches; a node processes one message at a time
in arrival order, which is where the overlay's overhead comes from.
"""

from __future__ import annotations

import asyncio
import itertools
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Awaitable, Callable

import networkx as nx

from .descriptor import normalize_tag
from .errors import DeliveryError, UsageError
from .transport import Request, Router, Transport

log = logging.getLogger(__name__)

TOPOLOGIES = ("ring", "line", "random-regular")
DEFAULT_D_PROC_MS = 1.0
DEFAULT_TTL_MS = 30_000.0


@dataclass
class Advertisement:
    robot_id: str
    capabilities: tuple[str, ...]
    state: str
    digest: str
    origin: int
    owner_uri: str = ""
    version: int = 1
    descriptor: dict | None = None
    hop_count: int = 0

    def to_dict(self) -> dict:
        return {"robotid": self.robot_id, "caps": list(self.capabilities), "state": self.state,
                "digest": self.digest, "origin": self.origin, "owner": self.owner_uri,
                "version": self.version, "descriptor": self.descriptor, "hop_count": self.hop_count}

    @classmethod
    def from_dict(cls, raw: dict) -> Advertisement:
        return cls(raw["robotid"], tuple(raw["caps"]), raw["state"], raw["digest"], raw["origin"],
                   raw.get("owner", ""), raw.get("version", 1), raw.get("descriptor"),
                   raw.get("hop_count", 0))


@dataclass
class CacheEntry:
    adv: Advertisement
    expires_at: float


@dataclass
class DiscoveryResult:
    candidates: list[Advertisement]
    rounds: int
    partial: bool = False
    delay_ms: float = 0.0


@dataclass
class PipeResult:
    sent_ms: float
    received_ms: float
    hops: int
    reply: dict | None = None

    @property
    def delay_ms(self) -> float:
        return self.received_ms - self.sent_ms


@dataclass
class _Query:
    tags: frozenset[str]
    waiting: set[int]
    done: asyncio.Event = field(default_factory=asyncio.Event)


PipeHandler = Callable[[dict], Awaitable[dict]]


def build_topology(n: int, topology: str = "ring", degree: int = 3, seed: int = 0) -> nx.Graph:
    """Overlay graph on nodes ``1..n``."""
    if n < 1:
        raise UsageError("an overlay needs at least one node")
    if topology == "ring":
        g = nx.cycle_graph(n) if n > 2 else nx.path_graph(n)
    elif topology == "line":
        g = nx.path_graph(n)
    elif topology == "random-regular":
        d = min(degree, n - 1)
        if (d * n) % 2:
            d -= 1
        g = nx.random_regular_graph(d, n, seed=seed) if d > 0 else nx.empty_graph(n)
    else:
        raise UsageError(f"unknown topology {topology!r}; expected one of {TOPOLOGIES}")
    return nx.relabel_nodes(g, {i: i + 1 for i in range(n)})


class OverlayNode:
    def __init__(self, net: OverlayNetwork, node_id: int):
        self.net = net
        self.node_id = node_id
        self.uri = ""
        self.iaas_uri = ""
        self.up = True
        self.local: dict[str, Advertisement] = {}
        self.cache: dict[str, CacheEntry] = {}
        self.heard: dict[int, float] = {}
        self.seen: set[str] = set()
        self.processed = 0
        self.pipe_handler: PipeHandler | None = None
        self._lock = asyncio.Lock()
        self._qparent: dict[str, int] = {}
        self._queries: dict[str, _Query] = {}
        self._pipes: dict[str, asyncio.Future] = {}
        self._seq = itertools.count(1)

    @property
    def transport(self) -> Transport:
        return self.net.transport

    @property
    def neighbors(self) -> list[int]:
        return sorted(self.net.graph.neighbors(self.node_id))

    def _router(self) -> Router:
        r = Router()
        r.add("POST", "/overlay/msg", self._on_wire)
        return r

    # -- message plumbing -----------------------------------------------------

    def _send(self, to: int, msg: dict) -> None:
        peer = self.net.nodes[to]
        msg = dict(msg, prev=self.node_id)
        self.transport.spawn(self._post(peer.uri, msg), name=f"ov{self.node_id}->ov{to}")

    async def _post(self, uri: str, msg: dict) -> None:
        try:
            await self.transport.request("POST", uri + "/overlay/msg", msg)
        except Exception as exc:  # a lost overlay packet is not fatal
            log.debug("overlay packet to %s lost: %s", uri, exc)

    def _on_wire(self, req: Request):
        if not self.up:
            return {"dropped": True}
        self.transport.spawn(self._process(req.body), name=f"ov{self.node_id}:{req.body.get('kind')}")
        return {"queued": True}

    async def _process(self, msg: dict) -> None:
        async with self._lock:
            await self.transport.sleep_ms(self.net.d_proc_ms)
            self.processed += 1
            handler = getattr(self, "_on_" + msg["kind"].replace("-", "_"))
            handler(msg)

    def _new_id(self, kind: str) -> str:
        return f"{kind}:{self.node_id}:{next(self._seq)}"

    def _flood(self, msg: dict, exclude: int | None = None) -> None:
        if msg["hop"] >= self.net.hop_bound:
            return
        fwd = dict(msg, hop=msg["hop"] + 1)
        for nb in self.neighbors:
            if nb != exclude:
                self._send(nb, fwd)

    # -- advertisements -------------------------------------------------------

    def advertise(self, adv: Advertisement) -> None:
        """Register a local robot and flood its advertisement."""
        adv.origin = self.node_id
        adv.hop_count = 0
        if adv.state == "OFFLINE":
            self.local.pop(adv.robot_id, None)
        else:
            self.local[adv.robot_id] = adv
        msg_id = self._new_id("adv")
        self.seen.add(msg_id)
        self._flood({"kind": "adv", "id": msg_id, "hop": 0, "adv": adv.to_dict()})

    def _on_adv(self, msg: dict) -> None:
        if msg["id"] in self.seen:
            return
        self.seen.add(msg["id"])
        adv = Advertisement.from_dict(msg["adv"])
        adv.hop_count = msg["hop"]
        self._cache(adv)
        self._flood(msg, exclude=msg["prev"])

    def _cache(self, adv: Advertisement) -> None:
        now = self.transport.now_ms()
        self.heard[adv.origin] = now
        current = self.cache.get(adv.robot_id)
        if current is not None and current.adv.version > adv.version:
            return
        if adv.state == "OFFLINE":
            self.cache.pop(adv.robot_id, None)
        else:
            self.cache[adv.robot_id] = CacheEntry(adv, now + self.net.ttl_ms)

    def fresh_cache(self) -> dict[str, Advertisement]:
        now = self.transport.now_ms()
        for rid in [r for r, e in self.cache.items() if e.expires_at <= now]:
            del self.cache[rid]
        return {rid: e.adv for rid, e in self.cache.items()}

    def clear_cache(self) -> None:
        self.cache.clear()
        self.heard.clear()

    def warm(self) -> bool:
        now = self.transport.now_ms()
        peers = self.net.reachable(self.node_id) - {self.node_id}
        return all(now - self.heard.get(p, -float("inf")) < self.net.ttl_ms for p in peers)

    # -- discovery ------------------------------------------------------------

    async def overlay_discover(self, tags=(), match: str = "all",
                               timeout_ms: float | None = None) -> DiscoveryResult:
        """Robots matching ``tags``: all of them (``match="all"``) or any."""
        start = self.transport.now_ms()
        wanted = frozenset(normalize_tag(t) for t in tags)
        rounds = 0
        partial = False
        if not self.warm():
            rounds = 1
            peers = self.net.reachable(self.node_id) - {self.node_id}
            qid = self._new_id("query")
            query = _Query(wanted, set(peers))
            self._queries[qid] = query
            self.seen.add(qid)
            if peers:
                self._flood({"kind": "query", "id": qid, "hop": 0, "origin": self.node_id,
                             "tags": sorted(wanted)})
                timeout_ms = self.net.query_timeout_ms if timeout_ms is None else timeout_ms
                try:
                    await asyncio.wait_for(query.done.wait(), timeout_ms / 1000.0)
                except asyncio.TimeoutError:
                    partial = True
            del self._queries[qid]
        pool = list(self.local.values()) + list(self.fresh_cache().values())
        out = [a for a in pool if _matches(a, wanted, match)]
        out.sort(key=lambda a: a.robot_id)
        return DiscoveryResult(out, rounds, partial, self.transport.now_ms() - start)

    def _on_query(self, msg: dict) -> None:
        if msg["id"] in self.seen:
            return
        self.seen.add(msg["id"])
        self._qparent[msg["id"]] = msg["prev"]
        self._flood(msg, exclude=msg["prev"])
        entries = [a.to_dict() for _, a in sorted(self.local.items())]
        self._send(msg["prev"], {"kind": "resp", "qid": msg["id"], "dest": msg["origin"],
                                 "from": self.node_id, "entries": entries})

    def _on_resp(self, msg: dict) -> None:
        if msg["dest"] != self.node_id:
            parent = self._qparent.get(msg["qid"])
            if parent is None:
                return
            self._send(parent, msg)
            return
        self.heard[msg["from"]] = self.transport.now_ms()
        for raw in msg["entries"]:
            self._cache(Advertisement.from_dict(raw))
        query = self._queries.get(msg["qid"])
        if query is not None:
            query.waiting.discard(msg["from"])
            if not query.waiting:
                query.done.set()

    # -- pipes ----------------------------------------------------------------

    async def pipe_send(self, dst: int, payload: dict, timeout_ms: float | None = None) -> PipeResult:
        """Send ``payload`` to node ``dst`` and wait for the handler's reply."""
        sent = self.transport.now_ms()
        if dst == self.node_id:
            reply = await self._deliver(payload)
            return PipeResult(sent, sent, 0, reply)
        path = self.net.route(self.node_id, dst)
        pipe_id = self._new_id("pipe")
        fut = asyncio.get_running_loop().create_future()
        self._pipes[pipe_id] = fut
        self._send(path[1], {"kind": "pipe", "id": pipe_id, "path": path, "idx": 1,
                             "sent_ms": sent, "payload": payload})
        timeout_ms = self.net.query_timeout_ms if timeout_ms is None else timeout_ms
        try:
            received, reply = await asyncio.wait_for(fut, timeout_ms / 1000.0)
        except asyncio.TimeoutError:
            raise DeliveryError(f"pipe {pipe_id} to node {dst} timed out") from None
        finally:
            self._pipes.pop(pipe_id, None)
        return PipeResult(sent, received, len(path) - 1, reply)

    async def _deliver(self, payload: dict) -> dict:
        if self.pipe_handler is None:
            return {"status": 404, "body": {"error": "NotFound", "message": "no pipe handler"}}
        return await self.pipe_handler(payload)

    def _on_pipe(self, msg: dict) -> None:
        path, idx = msg["path"], msg["idx"]
        if idx < len(path) - 1:
            self._send(path[idx + 1], dict(msg, idx=idx + 1))
            return
        received = self.transport.now_ms()
        self.net.receipts.append((msg["id"], path[0], self.node_id, msg["sent_ms"], received))
        self.transport.spawn(self._answer(msg, received), name=f"pipe-answer:{msg['id']}")

    async def _answer(self, msg: dict, received: float) -> None:
        reply = await self._deliver(msg["payload"])
        back = list(reversed(msg["path"]))
        self._send(back[1], {"kind": "pipe-reply", "id": msg["id"], "path": back, "idx": 1,
                             "received_ms": received, "reply": reply})

    def _on_pipe_reply(self, msg: dict) -> None:
        path, idx = msg["path"], msg["idx"]
        if idx < len(path) - 1:
            self._send(path[idx + 1], dict(msg, idx=idx + 1))
            return
        fut = self._pipes.get(msg["id"])
        if fut is not None and not fut.done():
            fut.set_result((msg["received_ms"], msg["reply"]))


def _matches(adv: Advertisement, wanted: frozenset[str], match: str) -> bool:
    if not wanted:
        return True
    caps = set(adv.capabilities)
    return wanted <= caps if match == "all" else bool(wanted & caps)


class OverlayNetwork:
    def __init__(self, transport: Transport, n: int, topology: str = "ring",
                 d_proc_ms: float = DEFAULT_D_PROC_MS, ttl_ms: float = DEFAULT_TTL_MS,
                 degree: int = 3, seed: int = 0, name: str = "overlay"):
        if d_proc_ms < 0 or ttl_ms <= 0:
            raise UsageError("d_proc must be non-negative and the TTL positive")
        self.transport = transport
        self.topology = topology
        self.d_proc_ms = d_proc_ms
        self.ttl_ms = ttl_ms
        self.name = name
        self.graph = build_topology(n, topology, degree, seed)
        self.hop_bound = max(1, _diameter(self.graph))
        latency = getattr(transport, "latency_ms", 5.0)
        self.query_timeout_ms = max(transport.default_timeout_ms,
                                    4 * (self.hop_bound + 1) * (latency + d_proc_ms + 1) * max(n, 1))
        self.nodes = {i: OverlayNode(self, i) for i in sorted(self.graph.nodes)}
        # (pipe id, src, dst, sent_ms, received_ms) for every delivered pipe message
        self.receipts: list[tuple[str, int, int, float, float]] = []

    async def start(self) -> None:
        for node in self.nodes.values():
            node.uri = await self.transport.serve(f"{self.name}-{node.node_id}", node._router())

    def node(self, node_id: int) -> OverlayNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UsageError(f"no overlay node {node_id}") from None

    def node_for_iaas(self, iaas_uri: str) -> OverlayNode:
        for node in self.nodes.values():
            if node.iaas_uri == iaas_uri:
                return node
        raise DeliveryError(f"no overlay node serves {iaas_uri}")

    def _live_graph(self) -> nx.Graph:
        return self.graph.subgraph(n for n, node in self.nodes.items() if node.up)

    def reachable(self, node_id: int) -> set[int]:
        g = self._live_graph()
        if node_id not in g:
            return {node_id}
        return set(nx.node_connected_component(g, node_id))

    def route(self, src: int, dst: int) -> list[int]:
        """Shortest path by BFS, preferring the lowest node id at each tie."""
        g = self._live_graph()
        if src not in g or dst not in g:
            raise DeliveryError(f"node {src if src not in g else dst} is down")
        parent = {src: None}
        frontier = deque([src])
        while frontier:
            cur = frontier.popleft()
            if cur == dst:
                break
            for nb in sorted(g.neighbors(cur)):
                if nb not in parent:
                    parent[nb] = cur
                    frontier.append(nb)
        if dst not in parent:
            raise DeliveryError(f"no overlay path from {src} to {dst}")
        path = [dst]
        while parent[path[-1]] is not None:
            path.append(parent[path[-1]])
        return path[::-1]


def _diameter(g: nx.Graph) -> int:
    if g.number_of_nodes() <= 1:
        return 0
    return max(max(nx.eccentricity(g.subgraph(c)).values()) for c in nx.connected_components(g))


async def advertise(node: OverlayNode, adv: Advertisement) -> None:
    node.advertise(adv)


async def overlay_discover(node: OverlayNode, tags=(), match: str = "all") -> DiscoveryResult:
    return await node.overlay_discover(tags, match)


async def pipe_send(src: OverlayNode, dst: int, payload: dict) -> PipeResult:
    return await src.pipe_send(dst, payload)
