#!/usr/bin/env python3
"""Walkthrough: auditing cookie leaks to a cloaked tracker.

A first-party analytics cookie set on the page is forwarded to the cloaked
tracker host in three ways — the Cookie header the browser attaches
automatically (the cloaking side effect), a POST body, and a URL parameter.
The audit finds all three and the transport check flags an http:// beacon on
an https:// page.

Run:  python3 demos/demo_leaks.py
"""

import json
import tempfile
from pathlib import Path

from cnametrack.detect import detect_publishers
from cnametrack.dnsgraph import DnsRecordStore
from cnametrack.ingest import load_crawl_jsonl
from cnametrack.leaks import audit_leaks
from cnametrack.model import TrackerSignature
from cnametrack.sitectx import PublicSuffixTable

PERSIST = "Expires=Wed, 01 Jan 2031 00:00:00 GMT"
VALUE = "GA1.2.1234567890.555"


def write_capture(path: Path):
    records = [
        {"record_type": "visit", "visit_id": "v1",
         "page_url": "https://www.coolshop.com/"},
        # the page sets a long-lived analytics cookie for the whole site
        {"record_type": "transaction", "visit_id": "v1",
         "url": "https://www.coolshop.com/", "content_type": "text/html",
         "response_headers": [["Set-Cookie",
                               f"_ga={VALUE}; Domain=coolshop.com; {PERSIST}"]]},
        # cloaked tracker host is same-site, so the browser attaches the cookie
        {"record_type": "transaction", "visit_id": "v1",
         "url": "https://track.coolshop.com/ea/collect",
         "request_headers": [["Cookie", f"_ga={VALUE}"]]},
        # the tracker script also ships it in a POST body ...
        {"record_type": "transaction", "visit_id": "v1",
         "url": "https://track.coolshop.com/ea/sync", "method": "POST",
         "post_body": json.dumps({"ga": VALUE}),
         "initiators": ["https://track.coolshop.com/ea/tag.js"]},
        # ... and in a URL parameter, over plain http on an https page
        {"record_type": "transaction", "visit_id": "v1",
         "url": f"http://track.coolshop.com/ea/view?ga={VALUE}",
         "request_headers": [["Cookie", f"_ga={VALUE}"]]},
    ]
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def main():
    psl = PublicSuffixTable.bundled()
    dns = DnsRecordStore()
    dns.add("track.coolshop.com", "CNAME", "c9.sneakytrack.net")
    dns.add("c9.sneakytrack.net", "A", "203.0.113.10")

    with tempfile.TemporaryDirectory() as tmp:
        capture = Path(tmp) / "capture.jsonl"
        write_capture(capture)
        corpus = load_crawl_jsonl(capture, psl)

    sig = TrackerSignature("sneakytrack", cname_suffixes=("sneakytrack.net",),
                           path_patterns=("/ea/*",))
    detections = detect_publishers(corpus, dns, [sig], None, psl)
    result = audit_leaks(corpus, detections, [sig], psl)

    print(f"cookie inventory: {result.inventory_size} distinct cookie(s)\n")
    print("== Leak findings ==")
    for f in result.findings:
        print(f"  [{f.channel.value}] {f.cookie.name} (set by "
              f"{f.cookie.setter.value} on {f.cookie.set_on_host}) "
              f"leaked to {f.tracker_id} via {f.carrier.url}")
        if f.active_exfiltration:
            print("      active exfiltration: request initiated by tracker script")

    print("\n== Transport findings ==")
    for t in result.transport:
        print(f"  [{t.kind.value}] {t.carrier.url} on {t.site}")


if __name__ == "__main__":
    main()
