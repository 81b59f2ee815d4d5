#!/usr/bin/env python3
"""Walkthrough: reconstructing tracker adoption over monthly snapshots.

Three months of data, newest first.  In the newest month the publisher's
tracking subdomain CNAMEs into the tracker; in the two older months the CNAME
is gone and only an A record to the tracker's (old) address remains.  The
backward iteration learns the address from the newest month and keeps
detecting the publisher in the older ones.

Run:  python3 demos/demo_history.py
"""

import json
import tempfile
from pathlib import Path

from cnametrack.dnsgraph import DnsRecordStore
from cnametrack.history import MonthDataset, backward_iterate
from cnametrack.ingest import load_crawl_jsonl
from cnametrack.model import TrackerSignature
from cnametrack.sitectx import PublicSuffixTable

MONTHS = ["2020-10", "2020-09", "2020-08"]  # descending
OLD_IP = "198.18.44.9"


def month_dataset(month: str, psl, tmp: Path) -> MonthDataset:
    records = [
        {"record_type": "visit", "visit_id": f"{month}-v1",
         "page_url": "https://www.coolshop.com/", "month": month},
        {"record_type": "transaction", "visit_id": f"{month}-v1",
         "url": "https://metrics.coolshop.com/ea/collect?uid=1"},
    ]
    path = tmp / f"{month}.jsonl"
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")

    dns = DnsRecordStore()
    if month == MONTHS[0]:
        dns.add("metrics.coolshop.com", "CNAME", "c1.sneakytrack.net", month)
        dns.add("c1.sneakytrack.net", "A", OLD_IP, month)
    else:
        # older snapshots: the CNAME evidence has vanished
        dns.add("metrics.coolshop.com", "A", OLD_IP, month)
    return MonthDataset(month, load_crawl_jsonl(path, psl), dns)


def main():
    psl = PublicSuffixTable.bundled()
    sig = TrackerSignature("sneakytrack", cname_suffixes=("sneakytrack.net",),
                           path_patterns=("/ea/*",))
    with tempfile.TemporaryDirectory() as tmp:
        months = [month_dataset(m, psl, Path(tmp)) for m in MONTHS]

    monthly = backward_iterate(months, [sig], psl)
    for m in monthly:
        print(f"== {m.month} ==")
        print(f"  pool snapshot: {m.pool_snapshot}")
        if not m.detections:
            print("  no detections")
        for det in m.detections:
            print(f"  {det.publisher_etld1} -> {det.tracker_id} "
                  f"({det.cloaking_mechanism.value})")
    print("\nThe two older months are detected through the accumulated IP "
          f"pool ({OLD_IP}), even though their CNAME records are gone.")


if __name__ == "__main__":
    main()
