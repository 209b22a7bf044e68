from __future__ import annotations

import networkx as nx
import pytest

from helpers import arms_doc, light_doc
from roboiaas.descriptor import from_document
from roboiaas.errors import DeliveryError, UsageError
from roboiaas.marketplace import PresenceServer
from roboiaas.overlay import Advertisement, OverlayNetwork, build_topology
from roboiaas.transport import SimTransport, run_sim

L = 5.0
D = 1.0


async def boot(n, topology="ring", jitter=0.0, ttl_ms=30_000.0, d_proc=D):
    t = SimTransport(L, jitter, 0)
    net = OverlayNetwork(t, n, topology, d_proc_ms=d_proc, ttl_ms=ttl_ms)
    await net.start()
    return t, net


def adv(rid, caps, state="IDLE", version=1):
    return Advertisement(rid, tuple(caps), state, f"d-{rid}", 0, version=version)


async def echo(payload):
    return {"status": 200, "body": payload}


# -- advertisement flooding --------------------------------------------------------

def test_ring_advertisement_reaches_everyone_within_hop_bound():
    async def main():
        t, net = await boot(4)
        net.node(1).advertise(adv("rob-1", ["light"]))
        await t.settle()
        holders = [n for n in net.nodes.values() if "rob-1" in n.cache]
        assert sorted(n.node_id for n in holders) == [2, 3, 4]
        assert max(n.cache["rob-1"].adv.hop_count for n in holders) == 2
        assert net.node(3).cache["rob-1"].adv.hop_count == 2
    run_sim(main)


def test_flood_duplicates_are_suppressed():
    async def main():
        t, net = await boot(4)
        net.node(1).advertise(adv("rob-1", ["light"]))
        await t.settle()
        # node 3 hears the advert from both sides but handles it once
        processed = {n.node_id: n.processed for n in net.nodes.values()}
        assert processed[1] == 0
        assert processed[2] == processed[4] == 1 and processed[3] == 2
        assert len(net.node(3).cache) == 1
    run_sim(main)


def test_offline_advert_removes_cache_entry_and_old_versions_ignored():
    async def main():
        t, net = await boot(3)
        net.node(1).advertise(adv("rob-1", ["light"], version=2))
        await t.settle()
        net.node(2)._cache(adv("rob-1", ["light"], "EXECUTING", version=1))
        assert net.node(2).cache["rob-1"].adv.version == 2
        net.node(1).advertise(adv("rob-1", ["light"], "OFFLINE", version=3))
        await t.settle()
        assert all("rob-1" not in n.cache for n in net.nodes.values())
    run_sim(main)


# -- discovery ---------------------------------------------------------------------

def test_single_node_discovery_is_local():
    async def main():
        t, net = await boot(1)
        net.node(1).advertise(adv("rob-1", ["light"]))
        res = await net.node(1).overlay_discover(["light"])
        assert [a.robot_id for a in res.candidates] == ["rob-1"]
        assert res.rounds == 0 and res.delay_ms == 0
    run_sim(main)


def test_warm_cache_answers_without_a_round():
    async def main():
        t, net = await boot(4)
        for k in range(1, 5):
            net.node(k).advertise(adv(f"rob-{k}", ["light"] if k % 2 else ["winch"]))
        await t.settle()
        res = await net.node(1).overlay_discover(["light"])
        assert res.rounds == 0 and res.delay_ms == 0
        assert [a.robot_id for a in res.candidates] == ["rob-1", "rob-3"]
    run_sim(main)


def test_cold_cache_costs_a_round_trip_to_the_far_side():
    async def main():
        t, net = await boot(4)
        for k in range(1, 5):
            net.node(k).advertise(adv(f"rob-{k}", ["light"]))
        await t.settle()
        await t.sleep_ms(30_001)
        assert not net.node(1).warm()
        res = await net.node(1).overlay_discover(["light"])
        assert res.rounds == 1 and not res.partial
        assert [a.robot_id for a in res.candidates] == ["rob-1", "rob-2", "rob-3", "rob-4"]
        # the far node is two hops away: query out and answer back
        assert res.delay_ms >= 4 * L
    run_sim(main)


def test_match_any_versus_all():
    async def main():
        t, net = await boot(2)
        net.node(1).advertise(adv("rob-1", ["light", "winch"]))
        net.node(1).advertise(adv("rob-2", ["light"]))
        r_all = await net.node(1).overlay_discover(["light", "winch"])
        r_any = await net.node(1).overlay_discover(["light", "winch"], match="any")
        assert [a.robot_id for a in r_all.candidates] == ["rob-1"]
        assert [a.robot_id for a in r_any.candidates] == ["rob-1", "rob-2"]
    run_sim(main)


def test_discovery_parity_with_marketplace_query():
    async def main():
        t, net = await boot(4)
        server = PresenceServer(t)
        await server.start()
        docs = [arms_doc(k) for k in range(1, 5)] + [light_doc(k) for k in range(1, 5)]
        for k, doc in enumerate(docs):
            d = from_document(doc)
            rec = server.publish_robot(d, f"sim://iaas{k % 4 + 1}")
            net.node(k % 4 + 1).advertise(adv(rec.robot_id, sorted(d.sensor_names() | d.actuator_names())))
        await t.settle()
        for want in (["light"], ["gripper-arm"], ["movement-motor"], ["light", "gripper-arm"]):
            res = await net.node(2).overlay_discover(want)
            assert [a.robot_id for a in res.candidates] == [r.robot_id for r in server.query_robots(want)]
    run_sim(main)


# -- pipes -------------------------------------------------------------------------

def test_adjacent_pipe_costs_one_hop_plus_processing():
    async def main():
        t, net = await boot(4)
        for n in net.nodes.values():
            n.pipe_handler = echo
        res = await net.node(1).pipe_send(2, {"x": 1})
        assert res.hops == 1
        assert res.delay_ms == pytest.approx(L + D, abs=1e-6)
        assert res.reply == {"status": 200, "body": {"x": 1}}
    run_sim(main)


def test_three_hop_pipe_on_a_line():
    async def main():
        t, net = await boot(4, "line")
        net.node(4).pipe_handler = echo
        res = await net.node(1).pipe_send(4, {"x": 1})
        assert res.hops == 3
        assert res.delay_ms == pytest.approx(3 * (L + D), abs=1e-6)
    run_sim(main)


def test_pipe_to_self_is_immediate():
    async def main():
        t, net = await boot(2)
        net.node(1).pipe_handler = echo
        res = await net.node(1).pipe_send(1, {"x": 1})
        assert res.delay_ms == 0 and res.hops == 0
    run_sim(main)


def test_pipe_without_handler_answers_not_found():
    async def main():
        t, net = await boot(2)
        res = await net.node(1).pipe_send(2, {})
        assert res.reply["status"] == 404
    run_sim(main)


def test_no_path_is_delivery_error():
    async def main():
        t, net = await boot(4, "line")
        net.node(2).up = False
        with pytest.raises(DeliveryError):
            await net.node(1).pipe_send(4, {})
        with pytest.raises(DeliveryError):
            net.route(2, 3)
    run_sim(main)


def test_route_prefers_lowest_id_on_ties():
    async def main():
        t, net = await boot(4)
        assert net.route(1, 3) == [1, 2, 3]
        assert net.route(2, 4) == [2, 1, 4]
    run_sim(main)


def test_cache_entries_expire_after_ttl():
    async def main():
        t, net = await boot(2, ttl_ms=100.0)
        net.node(1).advertise(adv("rob-1", ["light"]))
        await t.settle()
        assert "rob-1" in net.node(2).fresh_cache()
        await t.sleep_ms(101)
        assert net.node(2).fresh_cache() == {}
    run_sim(main)


# -- topology ------------------------------------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 3, 6, 8])
def test_ring_topology(n):
    g = build_topology(n, "ring")
    assert sorted(g.nodes) == list(range(1, n + 1))
    if n > 2:
        assert all(d == 2 for _, d in g.degree())
    assert nx.is_connected(g)


def test_random_regular_topology_is_seeded():
    a = build_topology(8, "random-regular", 3, seed=4)
    b = build_topology(8, "random-regular", 3, seed=4)
    assert sorted(a.edges) == sorted(b.edges)
    assert all(d == 3 for _, d in a.degree())


def test_topology_usage_errors():
    with pytest.raises(UsageError):
        build_topology(0)
    with pytest.raises(UsageError):
        build_topology(3, "star")
    with pytest.raises(UsageError):
        OverlayNetwork(SimTransport(), 3, d_proc_ms=-1)
