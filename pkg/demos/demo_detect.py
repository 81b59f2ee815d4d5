#!/usr/bin/env python3
"""Walkthrough: detecting CNAME-cloaked trackers in a captured crawl.

Builds a tiny synthetic capture in a temp directory — two publisher sites
whose "metrics." subdomain CNAMEs into a tracker network, plus one honest
CDN decoy — then runs candidate discovery, feature extraction, and
signature-based detection over it.

Run:  python3 demos/demo_detect.py
"""

import json
import tempfile
from pathlib import Path

from cnametrack.detect import (
    candidate_scan,
    detect_publishers,
    extract_features,
    heuristic_flag,
)
from cnametrack.dnsgraph import DnsRecordStore, resolve_chain, uncloaked_target
from cnametrack.ingest import load_crawl_jsonl
from cnametrack.model import TrackerSignature
from cnametrack.sitectx import PublicSuffixTable


def write_capture(path: Path):
    records = [
        {"record_type": "visit", "visit_id": "v1",
         "page_url": "https://www.coolshop.com/"},
        {"record_type": "transaction", "visit_id": "v1",
         "url": "https://metrics.coolshop.com/ea/collect?uid=abc",
         "response_headers": [["Set-Cookie", "etuid=u1; Max-Age=86400"]],
         "response_size": 43, "content_type": "image/gif"},
        {"record_type": "visit", "visit_id": "v2",
         "page_url": "https://www.newsdaily.net/"},
        {"record_type": "transaction", "visit_id": "v2",
         "url": "https://stats.newsdaily.net/ea/collect?uid=def",
         "response_size": 43, "content_type": "image/gif"},
        # honest CDN: same-site subdomain, many asset paths
        {"record_type": "visit", "visit_id": "v3",
         "page_url": "https://www.bigstore.org/"},
    ]
    for i in range(6):
        records.append({"record_type": "transaction", "visit_id": "v3",
                        "url": f"https://static.bigstore.org/assets/v{i}/app.js",
                        "response_size": 900 + 400 * i,
                        "content_type": "application/javascript"})
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def build_dns() -> DnsRecordStore:
    dns = DnsRecordStore()
    dns.add("metrics.coolshop.com", "CNAME", "c1.sneakytrack.net")
    dns.add("stats.newsdaily.net", "CNAME", "c2.sneakytrack.net")
    dns.add("c1.sneakytrack.net", "A", "203.0.113.10")
    dns.add("c2.sneakytrack.net", "A", "203.0.113.11")
    dns.add("static.bigstore.org", "CNAME", "edge7.honestcdn.net")
    dns.add("edge7.honestcdn.net", "A", "192.0.2.50")
    return dns


def main():
    psl = PublicSuffixTable.bundled()
    dns = build_dns()

    with tempfile.TemporaryDirectory() as tmp:
        capture = Path(tmp) / "capture.jsonl"
        write_capture(capture)
        corpus = load_crawl_jsonl(capture, psl)

    print("== 1. What does the DNS say? ==")
    for host in ("metrics.coolshop.com", "static.bigstore.org"):
        chain = resolve_chain(host, dns)
        print(f"  {host} -> {' -> '.join(chain.hops)} -> {chain.terminal_ips}")
        print(f"    uncloaked target: {uncloaked_target(chain, psl)}")

    print("\n== 2. Candidate discovery (same-site hosts that uncloak elsewhere) ==")
    for agg in candidate_scan(corpus, dns, psl, min_sites=1):
        fv = extract_features(agg)
        print(f"  {agg.target_etld1}: {fv.sites} site(s), "
              f"{fv.mean_unique_paths_per_site:.1f} paths/site, "
              f"{fv.bucket_count} size buckets -> {heuristic_flag(fv).value}")

    print("\n== 3. Signature-confirmed detection ==")
    sig = TrackerSignature("sneakytrack", cname_suffixes=("sneakytrack.net",),
                           path_patterns=("/ea/*",))
    for det in detect_publishers(corpus, dns, [sig], None, psl):
        print(f"  {det.publisher_etld1} uses {det.tracker_id} "
              f"({det.context.value}, {det.cloaking_mechanism.value}, "
              f"{len(det.evidence)} evidence transaction(s))")


if __name__ == "__main__":
    main()
