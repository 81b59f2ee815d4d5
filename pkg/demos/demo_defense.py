#!/usr/bin/env python3
"""Walkthrough: why the same blocklist behaves differently per defense.

The same ``||sneakytrack.net^`` rule is evaluated three ways against a
cloaked request:

* plain     — matches the literal URL; the cloaked first-party hostname
              sails through.
* uncloaked — re-matches after substituting the CNAME chain's last hop
              (what a browser extension with DNS access can do).
* sinkhole  — a resolver refuses to resolve any name whose chain touches a
              listed domain (Pi-hole style).

Run:  python3 demos/demo_defense.py
"""

from cnametrack.defense import (
    UncloakCache,
    match_plain,
    match_sinkhole,
    match_uncloaked,
    pure_domain_rules,
)
from cnametrack.dnsgraph import DnsRecordStore
from cnametrack.filterlist import parse_rule
from cnametrack.sitectx import Relation


def main():
    rules = [parse_rule("||sneakytrack.net^")]
    dns = DnsRecordStore()
    dns.add("metrics.coolshop.com", "CNAME", "c1.sneakytrack.net")
    dns.add("c1.sneakytrack.net", "A", "203.0.113.10")

    cloaked = "https://metrics.coolshop.com/ea/collect"
    direct = "https://cdn.sneakytrack.net/ea/collect"

    cache = UncloakCache()
    domains = pure_domain_rules(rules)

    print(f"rule set: {[r.raw for r in rules]}")
    print(f"sinkhole domain list: {domains}\n")

    for label, url, host in (("cloaked ", cloaked, "metrics.coolshop.com"),
                             ("direct  ", direct, "cdn.sneakytrack.net")):
        plain = match_plain(url, Relation.SAME_SITE, rules)
        unclk = match_uncloaked(url, Relation.SAME_SITE, rules, dns, cache)
        sink = match_sinkhole(host, dns, domains)
        print(f"{label} {url}")
        print(f"    plain:     {plain.verdict.value}")
        print(f"    uncloaked: {unclk.verdict.value}"
              + (f"  (rule {unclk.matched_rule.raw})" if unclk.matched_rule else ""))
        print(f"    sinkhole:  {sink.verdict.value}"
              + (f"  (domain {sink.matched_domain})" if sink.matched_domain else ""))
        print()

    # guaranteed relationships, by construction:
    #   plain blocked  =>  uncloaked blocked
    #   uncloaked blocked (pure domain rules)  =>  sinkhole blocked
    print("cache stats:", cache.hits, "hit(s),", cache.misses, "miss(es)")


if __name__ == "__main__":
    main()
