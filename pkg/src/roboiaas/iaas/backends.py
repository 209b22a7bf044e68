"""Publication/discovery/federation backends of an IaaS node.

:class:`PresenceBackend` talks to the marketplace presence server and keeps
a discovery cache fed by a standing list subscription.  :class:`OverlayBackend`
does the same job over the peer-to-peer overlay.  The node only sees the
common surface: publish, update, remove, remote candidates and federate.
"""

from __future__ import annotations

import asyncio
import itertools
import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING

from ..descriptor import RobotDescriptor, capability_set, digest, from_document, to_document
from ..errors import Conflict, IaaSError, TransportError, error_from_body
from ..overlay import Advertisement, OverlayNetwork
from ..transport import Request, Response, build_url

if TYPE_CHECKING:
    from .node import IaaSNode

log = logging.getLogger(__name__)

NOTIFY_PATH = "/presence/notify"


@dataclass
class RemoteRobot:
    robot_id: str
    owner_iaas: str
    state: str
    version: int
    descriptor: RobotDescriptor


@dataclass
class RemoteView:
    robots: list[RemoteRobot]
    degraded: bool = False
    rounds: int = 0


def _raise_for(resp: Response) -> Response:
    if not resp.ok:
        raise error_from_body(resp.status, resp.body)
    return resp


class Backend:
    kind = "abstract"

    def __init__(self):
        self.node: IaaSNode | None = None
        self._queue: asyncio.Queue | None = None

    @property
    def transport(self):
        return self.node.transport

    async def start(self, node: IaaSNode) -> None:
        self.node = node
        self._queue = asyncio.Queue()
        self.transport.spawn(self._publisher(), name=f"publisher:{node.node_id}", daemon=True)

    def update(self, descriptor: RobotDescriptor) -> None:
        """Queue a re-publication; the queue keeps this node's updates in order."""
        self._queue.put_nowait(descriptor)

    async def flush(self) -> None:
        await self._queue.join()

    async def _publisher(self) -> None:
        while True:
            descriptor = await self._queue.get()
            try:
                await self._push_update(descriptor)
            except IaaSError as exc:
                log.warning("%s: re-publication of %s failed: %s", self.node.node_id,
                            descriptor.robot_id, exc)
            finally:
                self._queue.task_done()

    def federation_timeout_ms(self, owner_uri: str) -> float:
        latency = getattr(self.transport, "latency_ms", None)
        if latency is None:
            return self.transport.default_timeout_ms
        return 5 * max(latency, 1.0)

    async def publish(self, descriptor: RobotDescriptor) -> str:
        raise NotImplementedError

    async def _push_update(self, descriptor: RobotDescriptor) -> None:
        raise NotImplementedError

    async def remove(self, robot_id: str) -> None:
        raise NotImplementedError

    async def remote_view(self, tags=()) -> RemoteView:
        raise NotImplementedError

    async def federate(self, owner_uri: str, path: str, body: dict) -> Response:
        raise NotImplementedError

    async def irdd_probe(self) -> tuple[float, int]:
        """One discovery delay sample: (delay ms, presentities received)."""
        raise NotImplementedError


class PresenceBackend(Backend):
    kind = "presence"

    def __init__(self, marketplace_uri: str):
        super().__init__()
        self.marketplace_uri = marketplace_uri
        self.cache: dict[str, RemoteRobot] = {}
        self.subscriber_id = ""
        self.notifications = 0
        self._probes: dict[str, asyncio.Future] = {}
        self._probe_seq = itertools.count(1)

    @property
    def callback_uri(self) -> str:
        return self.node.uri + NOTIFY_PATH

    async def start(self, node: IaaSNode) -> None:
        await super().start(node)
        node.router.add("POST", NOTIFY_PATH, self.on_notify)
        await self._subscribe()

    async def _subscribe(self) -> bool:
        url = build_url(self.marketplace_uri, "/robots", fromuri=self.callback_uri)
        try:
            resp = _raise_for(await self.transport.request("POST", url))
        except IaaSError as exc:
            log.warning("%s: marketplace subscription failed: %s", self.node.node_id, exc)
            return False
        self.subscriber_id = resp.body["subscriberid"]
        return True

    def on_notify(self, req: Request):
        body = req.body or {}
        probe = req.query.get("probe")
        if probe is not None:
            fut = self._probes.get(probe)
            if fut is not None and not fut.done():
                fut.set_result((self.transport.now_ms(), len(body.get("notifications", []))))
            return Response(204)
        self.notifications += 1
        for note in body.get("notifications", []):
            self._apply(note)
        return Response(204)

    def _apply(self, note: dict) -> None:
        robot_id = note["robotid"]
        current = self.cache.get(robot_id)
        if current is not None and note["version"] <= current.version:
            return
        if note["state"] == "OFFLINE":
            self.cache.pop(robot_id, None)
            return
        if "descriptor" in note:
            descriptor = from_document(note["descriptor"])
        elif current is not None:
            descriptor = current.descriptor
        else:
            log.warning("state-only notification for unknown robot %s", robot_id)
            return
        self.cache[robot_id] = RemoteRobot(robot_id, note["owner"], note["state"], note["version"],
                                           descriptor.with_state(note["state"]))

    async def publish(self, descriptor: RobotDescriptor) -> str:
        url = build_url(self.marketplace_uri, "/robots", owner=self.node.uri)
        resp = _raise_for(await self.transport.request("POST", url, to_document(descriptor)))
        return resp.body["robotid"]

    async def _push_update(self, descriptor: RobotDescriptor) -> None:
        url = build_url(self.marketplace_uri, f"/robots/{descriptor.robot_id}", owner=self.node.uri)
        _raise_for(await self.transport.request("PUT", url, to_document(descriptor)))

    async def remove(self, robot_id: str) -> None:
        await self.flush()
        url = build_url(self.marketplace_uri, f"/robots/{robot_id}", owner=self.node.uri)
        _raise_for(await self.transport.request("DELETE", url))

    async def remote_view(self, tags=()) -> RemoteView:
        if not self.subscriber_id and not await self._subscribe():
            return RemoteView([], True, 0)
        robots = [r for _, r in sorted(self.cache.items()) if r.owner_iaas != self.node.uri]
        return RemoteView(robots, False, 0)

    async def federate(self, owner_uri: str, path: str, body: dict) -> Response:
        return await self.transport.request("POST", owner_uri + path, body,
                                            timeout_ms=self.federation_timeout_ms(owner_uri))

    async def irdd_probe(self) -> tuple[float, int]:
        """Subscribe a fresh watcher and time the initial notification."""
        key = f"{self.node.node_id}-{next(self._probe_seq)}"
        fut = asyncio.get_running_loop().create_future()
        self._probes[key] = fut
        start = self.transport.now_ms()
        fromuri = f"{self.callback_uri}?probe={key}"
        url = build_url(self.marketplace_uri, "/robots", fromuri=fromuri)
        try:
            resp = _raise_for(await self.transport.request("POST", url))
            received, count = await asyncio.wait_for(fut, self.transport.default_timeout_ms / 1000.0)
        except asyncio.TimeoutError:
            raise TransportError("initial notification never arrived") from None
        finally:
            self._probes.pop(key, None)
        _raise_for(await self.transport.request(
            "DELETE", build_url(self.marketplace_uri, f"/robots/{resp.body['subscriberid']}")))
        return received - start, count


class OverlayBackend(Backend):
    kind = "overlay"

    def __init__(self, net: OverlayNetwork, overlay_id: int):
        super().__init__()
        self.net = net
        self.overlay_id = overlay_id
        self.versions: dict[str, int] = {}
        self._seq = itertools.count(1)

    @property
    def overlay_node(self):
        return self.net.node(self.overlay_id)

    async def start(self, node: IaaSNode) -> None:
        await super().start(node)
        ov = self.overlay_node
        ov.iaas_uri = node.uri
        ov.pipe_handler = self._on_pipe

    async def _on_pipe(self, payload: dict) -> dict:
        resp = await self.node.router.dispatch(Request("POST", payload["path"], {}, payload["body"]))
        return {"status": resp.status, "body": resp.body}

    def _advert(self, descriptor: RobotDescriptor, state: str) -> Advertisement:
        version = self.versions.get(descriptor.robot_id, 0) + 1
        self.versions[descriptor.robot_id] = version
        return Advertisement(descriptor.robot_id, tuple(sorted(capability_set(descriptor))), state,
                             digest(descriptor), self.overlay_id, self.node.uri, version,
                             to_document(descriptor))

    async def publish(self, descriptor: RobotDescriptor) -> str:
        robot_id = descriptor.robot_id
        if not robot_id:
            while True:
                robot_id = f"rob-{self.overlay_id}-{next(self._seq)}"
                if robot_id not in self.overlay_node.local:
                    break
        elif robot_id in self.overlay_node.local:
            raise Conflict(f"robot {robot_id} is already advertised")
        descriptor = descriptor.with_id(robot_id).with_state("IDLE")
        self.overlay_node.advertise(self._advert(descriptor, "IDLE"))
        return robot_id

    async def _push_update(self, descriptor: RobotDescriptor) -> None:
        self.overlay_node.advertise(self._advert(descriptor, descriptor.state))

    async def remove(self, robot_id: str) -> None:
        await self.flush()
        entry = self.overlay_node.local.get(robot_id)
        if entry is None:
            return
        descriptor = from_document(entry.descriptor).with_id(robot_id).with_state("OFFLINE")
        self.overlay_node.advertise(self._advert(descriptor, "OFFLINE"))

    async def remote_view(self, tags=()) -> RemoteView:
        result = await self.overlay_node.overlay_discover(tags, match="any")
        robots = [
            RemoteRobot(a.robot_id, a.owner_uri, a.state, a.version,
                        from_document(a.descriptor).with_id(a.robot_id).with_state(a.state))
            for a in result.candidates if a.origin != self.overlay_id
        ]
        return RemoteView(robots, result.partial, result.rounds)

    def federation_timeout_ms(self, owner_uri: str) -> float:
        base = super().federation_timeout_ms(owner_uri)
        dst = self.net.node_for_iaas(owner_uri).node_id
        hops = max(1, len(self.net.route(self.overlay_id, dst)) - 1)
        return base * hops + 2 * hops * self.net.d_proc_ms

    async def federate(self, owner_uri: str, path: str, body: dict) -> Response:
        dst = self.net.node_for_iaas(owner_uri).node_id
        result = await self.overlay_node.pipe_send(dst, {"path": path, "body": body},
                                                   timeout_ms=self.federation_timeout_ms(owner_uri))
        reply = result.reply or {}
        return Response(reply.get("status", 502), reply.get("body"))

    async def irdd_probe(self) -> tuple[float, int]:
        """Cold-cache discovery round; delay until the candidate set is complete."""
        ov = self.overlay_node
        ov.clear_cache()
        result = await ov.overlay_discover(())
        if result.partial:
            raise TransportError("overlay discovery timed out with partial results")
        return result.delay_ms, len(result.candidates)
