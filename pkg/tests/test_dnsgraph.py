"""Chain resolution and IP-pool tests, including the exhaustive small-graph
totality check against the independent reference walker."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chainref import enumerate_graphs, random_graph, reference_walk, store_from_graph
from cnametrack.dnsgraph import (
    DnsRecordStore,
    IpPool,
    accumulate_ips,
    resolve_chain,
    uncloaked_target,
)
from cnametrack.errors import CnameCycle, InvalidCidr


def make_store(cnames=(), a_records=()):
    store = DnsRecordStore()
    for host, target in cnames:
        store.add(host, "CNAME", target)
    for host, ip in a_records:
        store.add(host, "A", ip)
    return store


class TestResolveChain:
    def test_simple_chain(self):
        store = make_store(
            cnames=[("metrics.shop.com", "c1.tracker.net"),
                    ("c1.tracker.net", "edge.tracker.net")],
            a_records=[("edge.tracker.net", "203.0.113.9")],
        )
        chain = resolve_chain("metrics.shop.com", store)
        assert chain.hops == ("c1.tracker.net", "edge.tracker.net")
        assert chain.terminal_ips == ("203.0.113.9",)
        assert chain.last_hop == "edge.tracker.net"
        assert not chain.truncated

    def test_no_record_is_truncated(self):
        chain = resolve_chain("unknown.example.com", make_store())
        assert chain.truncated and not chain.hops and not chain.terminal_ips

    def test_direct_a_record(self):
        store = make_store(a_records=[("host.example.com", "192.0.2.5")])
        chain = resolve_chain("host.example.com", store)
        assert chain.hops == () and chain.terminal_ips == ("192.0.2.5",)
        assert not chain.truncated

    def test_cycle_raises(self):
        store = make_store(cnames=[("a.test", "b.test"), ("b.test", "a.test")])
        with pytest.raises(CnameCycle) as exc:
            resolve_chain("a.test", store)
        assert exc.value.host == "b.test" or exc.value.host == "a.test"

    def test_self_loop_raises(self):
        store = make_store(cnames=[("a.test", "a.test")])
        with pytest.raises(CnameCycle):
            resolve_chain("a.test", store)

    def test_depth_cap_truncates(self):
        cnames = [(f"h{i}.test", f"h{i+1}.test") for i in range(20)]
        store = make_store(cnames=cnames)
        chain = resolve_chain("h0.test", store, max_depth=10)
        assert chain.truncated and len(chain.hops) == 10

    def test_case_insensitive(self):
        store = make_store(cnames=[("Metrics.Shop.COM", "T.Tracker.NET")],
                           a_records=[("t.tracker.net", "192.0.2.1")])
        chain = resolve_chain("METRICS.shop.com", store)
        assert chain.hops == ("t.tracker.net",)

    def test_duplicate_cname_keeps_first(self, caplog):
        store = DnsRecordStore()
        store.add("a.test", "CNAME", "b.test")
        store.add("a.test", "CNAME", "c.test")
        assert store.cname_target("a.test") == "b.test"


class TestUncloakedTarget:
    def test_uncloaks_to_tracker_site(self, psl):
        store = make_store(cnames=[("metrics.shop.com", "x.tracker.net")],
                           a_records=[("x.tracker.net", "192.0.2.1")])
        chain = resolve_chain("metrics.shop.com", store)
        assert uncloaked_target(chain, psl) == "tracker.net"

    def test_same_site_cname_is_not_cloaking(self, psl):
        store = make_store(cnames=[("www.shop.com", "origin.shop.com")],
                           a_records=[("origin.shop.com", "192.0.2.1")])
        chain = resolve_chain("www.shop.com", store)
        assert uncloaked_target(chain, psl) is None

    def test_no_hops_no_target(self, psl):
        store = make_store(a_records=[("h.shop.com", "192.0.2.1")])
        assert uncloaked_target(resolve_chain("h.shop.com", store), psl) is None


class TestTotality:
    def test_exhaustive_small_graphs(self):
        """Every digraph on <= 4 nodes (full 5-node space runs in acceptance)."""
        checked = 0
        for nodes, graph in enumerate_graphs(4):
            store = store_from_graph(graph)
            for start in nodes:
                expected = reference_walk(start, graph, 10)
                try:
                    chain = resolve_chain(start, store, 10)
                    got = ("chain", list(chain.hops), list(chain.terminal_ips),
                           chain.truncated)
                except CnameCycle:
                    got = ("cycle",)
                assert got[0] == expected[0], (graph, start)
                if expected[0] == "chain":
                    assert got[1:] == tuple(expected[1:]), (graph, start)
                checked += 1
        assert checked > 1000

    def test_random_graphs(self):
        rng = random.Random(20260824)
        for _ in range(2000):
            nodes, graph = random_graph(rng)
            store = store_from_graph(graph)
            start = rng.choice(nodes)
            expected = reference_walk(start, graph, 10)
            try:
                chain = resolve_chain(start, store, 10)
                got = ("chain", list(chain.hops), list(chain.terminal_ips),
                       chain.truncated)
            except CnameCycle:
                got = ("cycle",)
            assert got[0] == expected[0], (graph, start)
            if expected[0] == "chain":
                assert got[1:] == tuple(expected[1:]), (graph, start)


class TestIpPool:
    def test_range_and_single_lookup(self):
        pool = IpPool()
        pool.add_range("203.0.113.0/28", "trk")
        pool.add_address("198.51.100.7", "trk", "2020-09")
        assert pool.lookup("203.0.113.5").tracker_id == "trk"
        assert pool.lookup("198.51.100.7").tracker_id == "trk"
        assert pool.lookup("8.8.8.8") is None
        assert pool.contains("203.0.113.5", "trk")
        assert not pool.contains("203.0.113.5", "other")

    def test_bad_cidr_raises(self):
        with pytest.raises(InvalidCidr):
            IpPool().add_range("not-a-cidr", "trk")

    def test_single_covered_by_own_range_skipped(self):
        pool = IpPool()
        pool.add_range("203.0.113.0/28", "trk")
        pool.add_address("203.0.113.5", "trk")
        assert pool.summary() == {"trk": {"singles": 0, "ranges": 1}}

    def test_range_added_later_absorbs_own_singles(self):
        pool = IpPool()
        pool.add_address("203.0.113.5", "trk")
        pool.add_range("203.0.113.0/28", "trk")
        assert pool.summary() == {"trk": {"singles": 0, "ranges": 1}}

    def test_cross_tracker_ambiguity_tiebreak(self):
        pool = IpPool()
        pool.add_range("203.0.113.0/24", "zeta")
        pool.add_address("203.0.113.5", "alpha")
        match = pool.lookup("203.0.113.5")
        assert match.tracker_id == "alpha"  # lexicographic tie-break
        assert match.ambiguous

    def test_first_seen_keeps_earliest_month(self):
        pool = IpPool()
        pool.add_address("192.0.2.1", "trk", "2020-10")
        pool.add_address("192.0.2.1", "trk", "2020-08")
        entry = pool._singles[__import__("ipaddress").ip_address("192.0.2.1")][0]
        assert entry.first_seen == "2020-08"

    def test_accumulate_from_confirmed_hosts(self):
        store = make_store(cnames=[("m.shop.com", "t.trk.net")],
                           a_records=[("t.trk.net", "198.51.100.9")])
        pool = IpPool()
        accumulate_ips({"m.shop.com": "trk"}, store, {"trk": ["203.0.113.0/28"]},
                       pool, "2020-09")
        assert pool.contains("198.51.100.9", "trk")
        assert pool.contains("203.0.113.3", "trk")

    @settings(max_examples=200)
    @given(addrs=st.lists(st.integers(0, 255), min_size=1, max_size=20))
    def test_pool_growth_is_monotone(self, addrs):
        pool = IpPool()
        seen = []
        for octet in addrs:
            addr = f"10.0.0.{octet}"
            pool.add_address(addr, "trk")
            seen.append(addr)
            assert all(pool.contains(a, "trk") for a in seen)
