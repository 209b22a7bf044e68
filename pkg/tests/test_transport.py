from __future__ import annotations

import asyncio
import statistics

import pytest

from roboiaas.bench.config import ScenarioConfig
from roboiaas.bench.fleet import FIRE_REMOTE_PENALTY
from roboiaas.bench.harness import measure_irdd, run_fire_suppression
from roboiaas.errors import NotFound, TransportError
from roboiaas.transport import Router, SimTransport, SocketTransport, build_url, run_sim


def echo_router():
    r = Router()
    r.add("POST", "/things/{thing}", lambda req, thing: {"thing": thing, "body": req.body, "q": req.query})
    r.add("GET", "/missing/{x}", lambda req, x: (_ for _ in ()).throw(NotFound(x)))

    async def slow(req):
        await asyncio.sleep(1.0)
        return {}
    r.add("GET", "/slow", slow)
    return r


def test_sim_request_costs_two_legs():
    async def main():
        t = SimTransport(5.0, 0.0)
        base = await t.serve("svc", echo_router())
        t0 = t.now_ms()
        resp = await t.request("POST", base + "/things/a?x=1", {"k": [1, 2]})
        assert t.now_ms() - t0 == pytest.approx(10.0)
        assert resp.ok and resp.body == {"thing": "a", "body": {"k": [1, 2]}, "q": {"x": "1"}}
    run_sim(main)


def test_sim_jitter_is_bounded_and_seeded():
    def delays(seed):
        t = SimTransport(5.0, 2.0, seed)
        return [t.link_delay_ms() for _ in range(200)]
    a = delays(1)
    assert a == delays(1) and a != delays(2)
    assert all(5.0 <= d <= 7.0 for d in a)
    assert statistics.fmean(a) == pytest.approx(6.0, abs=0.2)


def test_router_statuses():
    async def main():
        t = SimTransport(1.0, 0.0)
        base = await t.serve("svc", echo_router())
        assert (await t.request("GET", base + "/nowhere")).status == 404
        assert (await t.request("GET", base + "/things/a")).status == 405
        resp = await t.request("GET", base + "/missing/zz")
        assert resp.status == 404 and resp.body["error"] == "NotFound"
        with pytest.raises(TransportError):
            await t.request("GET", "sim://ghost/x")
        with pytest.raises(TransportError):
            await t.request("GET", base + "/slow", timeout_ms=50)
    run_sim(main)


def test_bodies_are_copied_not_shared():
    async def main():
        t = SimTransport(1.0, 0.0)
        seen = []
        r = Router()
        r.add("POST", "/x", lambda req: seen.append(req.body) or {})
        base = await t.serve("svc", r)
        body = {"a": [1]}
        await t.request("POST", base + "/x", body)
        body["a"].append(2)
        assert seen == [{"a": [1]}]
    run_sim(main)


def test_settle_waits_for_spawned_work():
    async def main():
        t = SimTransport(1.0, 0.0)
        done = []

        async def work():
            await t.sleep_ms(500)
            done.append(t.now_ms())
        t.spawn(work())
        await t.settle()
        assert done and not t.busy
    run_sim(main)


def test_build_url_keeps_uris_readable():
    assert build_url("sim://m/", "/robots", fromuri="sim://a/notify", owner=None) == \
        "sim://m/robots?fromuri=sim://a/notify"


# -- socket mode: orderings only ---------------------------------------------------

def test_socket_round_trip():
    async def main():
        t = SocketTransport()
        try:
            base = await t.serve("svc", echo_router())
            resp = await t.request("POST", base + "/things/b", {"v": 1})
            assert resp.body["thing"] == "b" and resp.body["body"] == {"v": 1}
            assert (await t.request("GET", base + "/things/b")).status == 405
        finally:
            await t.close()
    asyncio.run(main())


def test_socket_fire_suppression_completes():
    r = run_fire_suppression(ScenarioConfig(transport="socket", remote_penalty=FIRE_REMOTE_PENALTY))
    assert r.ok, r.error or r.violations
    assert r.coalition_types == ["arms", "light"]
    assert set(r.robot_states.values()) == {"IDLE"} and r.converged


def test_socket_irdd_ordering():
    m = measure_irdd(ScenarioConfig(transport="socket"), counts=(4,), reps=5)
    by = {b: statistics.fmean(s.value_ms for s in m.samples if s.backend == b)
          for b in ("presence", "overlay")}
    assert by["presence"] < by["overlay"]
