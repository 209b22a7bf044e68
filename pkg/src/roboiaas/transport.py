"""Pluggable request/response transport.

Two implementations share one interface so that every component is written
once as asyncio code:

* :class:`SimTransport` runs on :class:`SimLoop`, an event loop whose clock is
  virtual.  Each request leg costs ``latency_ms`` plus seeded uniform jitter,
  and the loop jumps straight to the next timer, so a scenario that spans
  minutes of simulated time finishes in milliseconds and is reproducible
  from its seed.
* :class:`SocketTransport` serves routers over real HTTP on localhost with
  aiohttp and timestamps with the monotonic clock.
"""

from __future__ import annotations

import asyncio
import inspect
import json
import logging
import random
import re
import selectors
from dataclasses import dataclass, field
from typing import Any, Awaitable, Callable
from urllib.parse import parse_qsl, quote, urlencode, urlsplit

from .errors import IaaSError, TransportError

log = logging.getLogger(__name__)


# -- virtual time -------------------------------------------------------------

class _VirtualSelector(selectors.DefaultSelector):
    def __init__(self, clock: list[float]):
        super().__init__()
        self._clock = clock

    def select(self, timeout=None):
        if timeout is None:
            raise RuntimeError("simulation deadlock: no runnable callbacks and no pending timers")
        if timeout > 0:
            self._clock[0] += timeout
        return super().select(0)


class SimLoop(asyncio.SelectorEventLoop):
    """Event loop that advances a virtual clock instead of sleeping."""

    def __init__(self):
        self._virtual_now = [0.0]
        super().__init__(_VirtualSelector(self._virtual_now))

    def time(self) -> float:
        return self._virtual_now[0]


def run_sim(main: Callable[[], Awaitable[Any]]) -> Any:
    """Run ``main()`` to completion on a fresh :class:`SimLoop`."""
    loop = SimLoop()
    try:
        asyncio.set_event_loop(loop)
        return loop.run_until_complete(main())
    finally:
        pending = [t for t in asyncio.all_tasks(loop) if not t.done()]
        for task in pending:
            task.cancel()
        if pending:
            loop.run_until_complete(asyncio.gather(*pending, return_exceptions=True))
        asyncio.set_event_loop(None)
        loop.close()


# -- messages and routing ----------------------------------------------------

@dataclass
class Request:
    method: str
    path: str
    query: dict[str, str] = field(default_factory=dict)
    body: Any = None


@dataclass
class Response:
    status: int = 200
    body: Any = None

    @property
    def ok(self) -> bool:
        return 200 <= self.status < 300


Handler = Callable[..., Any]


class Router:
    """Method + path-template dispatch, e.g. ``POST /robots/{robotid}``."""

    def __init__(self):
        self._routes: list[tuple[str, str, re.Pattern, Handler]] = []

    def add(self, method: str, template: str, handler: Handler) -> None:
        pattern = "^" + re.sub(r"\{(\w+)\}", r"(?P<\1>[^/]+)", template) + "$"
        self._routes.append((method.upper(), template, re.compile(pattern), handler))

    def routes(self) -> list[tuple[str, str]]:
        return [(m, t) for m, t, _, _ in self._routes]

    async def dispatch(self, request: Request) -> Response:
        allowed = False
        for method, _, pattern, handler in self._routes:
            m = pattern.match(request.path)
            if m is None:
                continue
            if method != request.method.upper():
                allowed = True
                continue
            try:
                result = handler(request, **m.groupdict())
                if inspect.isawaitable(result):
                    result = await result
            except IaaSError as exc:
                return Response(exc.status, exc.to_body())
            if isinstance(result, Response):
                return result
            return Response(200, result)
        if allowed:
            return Response(405, {"error": "MethodNotAllowed", "message": request.path})
        return Response(404, {"error": "NotFound", "message": f"no route for {request.path}"})


def build_url(base: str, path: str, **query) -> str:
    url = base.rstrip("/") + path
    query = {k: v for k, v in query.items() if v is not None}
    if query:
        url += "?" + urlencode(query, quote_via=quote, safe=":/")
    return url


# -- transports --------------------------------------------------------------

class Transport:
    """Common surface: a clock, named endpoints, and JSON request/response."""

    default_timeout_ms = 1000.0

    def __init__(self):
        self.inflight = 0
        self._tasks: set[asyncio.Task] = set()
        self._daemons: set[asyncio.Task] = set()

    def now_ms(self) -> float:
        return asyncio.get_running_loop().time() * 1000.0

    async def sleep_ms(self, ms: float) -> None:
        await asyncio.sleep(max(ms, 0.0) / 1000.0)

    def spawn(self, coro, name: str | None = None, daemon: bool = False) -> asyncio.Task:
        """Start a background task that is kept alive and whose failure is logged.

        Daemon tasks (long-lived queue workers) do not count towards :attr:`busy`.
        """
        task = asyncio.get_running_loop().create_task(coro, name=name)
        (self._daemons if daemon else self._tasks).add(task)
        task.add_done_callback(self._task_done)
        return task

    def _task_done(self, task: asyncio.Task) -> None:
        self._tasks.discard(task)
        self._daemons.discard(task)
        if not task.cancelled() and task.exception() is not None:
            log.error("background task %s failed", task.get_name(), exc_info=task.exception())

    @property
    def busy(self) -> bool:
        return self.inflight > 0 or bool(self._tasks)

    async def settle(self, poll_ms: float = 1.0, limit_ms: float = 600_000.0) -> None:
        """Wait until no request is in flight and no background task is pending."""
        start = self.now_ms()
        quiet = 0
        while quiet < 2:
            await self.sleep_ms(poll_ms)
            quiet = 0 if self.busy else quiet + 1
            if self.now_ms() - start > limit_ms:
                raise TimeoutError("transport did not settle")

    async def serve(self, name: str, router: Router) -> str:
        raise NotImplementedError

    async def request(self, method: str, url: str, body: Any = None,
                      timeout_ms: float | None = None) -> Response:
        raise NotImplementedError

    async def close(self) -> None:
        tasks = list(self._tasks | self._daemons)
        for task in tasks:
            task.cancel()
        if tasks:
            await asyncio.gather(*tasks, return_exceptions=True)


def _split(url: str) -> tuple[str, str, dict[str, str]]:
    parts = urlsplit(url)
    return parts.netloc, parts.path or "/", dict(parse_qsl(parts.query, keep_blank_values=True))


class SimTransport(Transport):
    """In-process transport on the virtual clock of :class:`SimLoop`.

    A request costs one link traversal to the endpoint and one back, each
    ``latency_ms + U(0, jitter_ms)``.  Bodies are round-tripped through JSON
    so nothing is shared by reference between endpoints.
    """

    scheme = "sim"

    def __init__(self, latency_ms: float = 5.0, jitter_ms: float = 0.1, seed: int = 0):
        super().__init__()
        if latency_ms < 0 or jitter_ms < 0:
            raise ValueError("latency and jitter must be non-negative")
        self.latency_ms = latency_ms
        self.jitter_ms = jitter_ms
        self.rng = random.Random(seed)
        self._endpoints: dict[str, Router] = {}
        self.default_timeout_ms = max(latency_ms, 1.0) * 100

    def link_delay_ms(self) -> float:
        jitter = self.rng.uniform(0.0, self.jitter_ms) if self.jitter_ms else 0.0
        return self.latency_ms + jitter

    async def serve(self, name: str, router: Router) -> str:
        if name in self._endpoints:
            raise ValueError(f"endpoint {name!r} already served")
        self._endpoints[name] = router
        return f"sim://{name}"

    def unserve(self, name: str) -> None:
        self._endpoints.pop(name, None)

    async def request(self, method, url, body=None, timeout_ms=None):
        timeout_ms = self.default_timeout_ms if timeout_ms is None else timeout_ms
        self.inflight += 1
        try:
            return await asyncio.wait_for(self._roundtrip(method, url, body), timeout_ms / 1000.0)
        except asyncio.TimeoutError:
            raise TransportError(f"{method} {url} timed out after {timeout_ms} ms") from None
        finally:
            self.inflight -= 1

    async def _roundtrip(self, method, url, body):
        host, path, query = _split(url)
        wire = None if body is None else json.dumps(body)
        await self.sleep_ms(self.link_delay_ms())
        router = self._endpoints.get(host)
        if router is None:
            raise TransportError(f"no endpoint {host!r}")
        request = Request(method.upper(), path, query, None if wire is None else json.loads(wire))
        response = await router.dispatch(request)
        reply = None if response.body is None else json.dumps(response.body)
        await self.sleep_ms(self.link_delay_ms())
        return Response(response.status, None if reply is None else json.loads(reply))


class SocketTransport(Transport):
    """HTTP on localhost via aiohttp; one listening port per served router."""

    scheme = "http"

    def __init__(self, host: str = "127.0.0.1", default_timeout_ms: float = 5000.0):
        super().__init__()
        self.host = host
        self.default_timeout_ms = default_timeout_ms
        self._runners = []
        self._session = None

    async def serve(self, name: str, router: Router) -> str:
        from aiohttp import web

        async def handle(http_request: web.Request) -> web.Response:
            raw = await http_request.read()
            body = json.loads(raw) if raw else None
            request = Request(http_request.method, http_request.path, dict(http_request.query), body)
            response = await router.dispatch(request)
            text = "" if response.body is None else json.dumps(response.body)
            return web.Response(status=response.status, text=text, content_type="application/json")

        app = web.Application()
        app.router.add_route("*", "/{tail:.*}", handle)
        runner = web.AppRunner(app, access_log=None)
        await runner.setup()
        site = web.TCPSite(runner, self.host, 0)
        await site.start()
        self._runners.append(runner)
        port = site._server.sockets[0].getsockname()[1]
        return f"http://{self.host}:{port}"

    async def request(self, method, url, body=None, timeout_ms=None):
        import aiohttp

        timeout_ms = self.default_timeout_ms if timeout_ms is None else timeout_ms
        if self._session is None:
            self._session = aiohttp.ClientSession()
        self.inflight += 1
        try:
            data = None if body is None else json.dumps(body)
            async with self._session.request(
                method, url, data=data, headers={"Content-Type": "application/json"},
                timeout=aiohttp.ClientTimeout(total=timeout_ms / 1000.0),
            ) as resp:
                raw = await resp.read()
                return Response(resp.status, json.loads(raw) if raw else None)
        except (aiohttp.ClientError, asyncio.TimeoutError) as exc:
            raise TransportError(f"{method} {url} failed: {exc!r}") from None
        finally:
            self.inflight -= 1

    async def close(self) -> None:
        await super().close()
        if self._session is not None:
            await self._session.close()
            self._session = None
        for runner in self._runners:
            await runner.cleanup()
        self._runners.clear()
