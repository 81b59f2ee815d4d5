"""Report rendering: JSON/CSV writers, rank-bin statistics, rollups, and
run manifests.  All output is deterministic for identical inputs."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

from .defense import DefenseReport
from .detect import Context, PublisherDetection
from .leaks import LeakAuditResult, LeakFinding

SCHEMA_VERSION = 1
TOOL_VERSION = "0.1.0"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_json(obj, path):
    payload = {"schema_version": SCHEMA_VERSION, **obj} if isinstance(obj, dict) else obj
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def write_manifest(out_dir, inputs: dict[str, str], config: dict):
    """Record input digests and config; identical manifests => identical reports."""
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": TOOL_VERSION,
        "inputs": {name: sha256_file(p) for name, p in sorted(inputs.items()) if p},
        "input_paths": {name: str(p) for name, p in sorted(inputs.items()) if p},
        "config": config,
    }
    write_json(manifest, Path(out_dir) / "manifest.json")
    return manifest


def check_manifest(out_dir) -> bool:
    """True when every input recorded in the manifest still has its digest."""
    path = Path(out_dir) / "manifest.json"
    if not path.exists():
        return True
    with open(path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    for name, digest in manifest.get("inputs", {}).items():
        p = manifest.get("input_paths", {}).get(name)
        if p and Path(p).exists() and sha256_file(p) != digest:
            return False
    return True


def detection_to_dict(det: PublisherDetection) -> dict:
    return {
        "publisher": det.publisher_etld1,
        "tracker": det.tracker_id,
        "context": det.context.value,
        "mechanism": det.cloaking_mechanism.value,
        "evidence": [
            {"visit_id": r.visit_id, "index": r.index, "url": r.url, "host": r.host}
            for r in det.evidence
        ],
    }


def write_detections(detections: list[PublisherDetection], out_dir):
    out_dir = Path(out_dir)
    write_json({"detections": [detection_to_dict(d) for d in detections]},
               out_dir / "publishers.json")
    with open(out_dir / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["publisher", "tracker", "context", "mechanism", "evidence_count"])
        for d in detections:
            w.writerow([d.publisher_etld1, d.tracker_id, d.context.value,
                        d.cloaking_mechanism.value, len(d.evidence)])


def leak_finding_to_dict(f: LeakFinding) -> dict:
    return {
        "site": f.site,
        "tracker": f.tracker_id,
        "channel": f.channel.value,
        "cookie_name": f.cookie.name,
        "cookie_setter": f.cookie.setter.value,
        "setter_origin": f.cookie.setter_origin,
        "carrier_url": f.carrier.url,
        "visit_id": f.carrier.visit_id,
        "matched_span": list(f.matched_span),
        "decoded": f.decoded,
        "third_party_setter": f.third_party_setter,
        "active_exfiltration": f.active_exfiltration,
    }


def write_leaks(result: LeakAuditResult, out_dir):
    out_dir = Path(out_dir)
    with open(out_dir / "leaks.jsonl", "w", encoding="utf-8") as fh:
        for f in result.findings:
            fh.write(json.dumps(leak_finding_to_dict(f), sort_keys=True) + "\n")
    rollup: dict[tuple[str, str], set[str]] = {}
    for f in result.findings:
        rollup.setdefault((f.tracker_id, f.channel.value), set()).add(f.site)
    with open(out_dir / "leak_rollup.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["tracker", "channel", "distinct_sites"])
        for (tracker, channel), sites in sorted(rollup.items()):
            w.writerow([tracker, channel, len(sites)])
    with open(out_dir / "transport.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["site", "kind", "tracker", "url"])
        for t in result.transport:
            w.writerow([t.site, t.kind.value, t.tracker_id, t.carrier.url])


def write_defense(report: DefenseReport, out_dir):
    out_dir = Path(out_dir)
    with open(out_dir / "defense_matrix.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["tracker", "plain_blocked_fraction", "uncloaked_blocked_fraction",
                    "sinkhole_blocked_fraction", "evidence_transactions"])
        for tracker, fr in sorted(report.fractions.items()):
            w.writerow([tracker, f"{fr['plain']:.4f}", f"{fr['uncloaked']:.4f}",
                        f"{fr['sinkhole']:.4f}", report.counts[tracker]])
    write_json({
        "verdicts": [
            {"visit_id": v.visit_id, "index": v.index, "url": v.url,
             "tracker": v.tracker_id, "plain": v.plain, "uncloaked": v.uncloaked,
             "sinkhole": v.sinkhole, "dns_missing": v.dns_missing}
            for v in report.verdicts
        ],
        "coverage_warnings": report.coverage_warnings,
    }, out_dir / "defense_verdicts.json")


def rank_bins(
    detections: list[PublisherDetection],
    ranking: dict[str, int],
    bin_size: int = 10000,
) -> list[dict]:
    """Per rank-bin percentage of sites with same-site / cross-site tracking."""
    same = {d.publisher_etld1 for d in detections if d.context is Context.SAME_SITE}
    cross = {d.publisher_etld1 for d in detections if d.context is Context.CROSS_SITE}
    if not ranking:
        return []
    max_rank = max(ranking.values())
    nbins = (max_rank - 1) // bin_size + 1
    bins = []
    for b in range(nbins):
        lo, hi = b * bin_size + 1, (b + 1) * bin_size
        members = [d for d, r in ranking.items() if lo <= r <= hi]
        n = len(members)
        n_same = sum(1 for d in members if d in same)
        n_cross = sum(1 for d in members if d in cross)
        bins.append({
            "bin_start": lo,
            "bin_end": hi,
            "sites": n,
            "same_site_pct": 100.0 * n_same / n if n else 0.0,
            "cross_site_pct": 100.0 * n_cross / n if n else 0.0,
        })
    return bins


def write_rank_bins(bins: list[dict], out_dir):
    with open(Path(out_dir) / "rank_bins.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_start", "bin_end", "sites", "same_site_pct", "cross_site_pct"])
        for b in bins:
            w.writerow([b["bin_start"], b["bin_end"], b["sites"],
                        f"{b['same_site_pct']:.4f}", f"{b['cross_site_pct']:.4f}"])


def cooccurrence_fraction(
    corpus, detections: list[PublisherDetection], rules, psl
) -> float:
    """Fraction of publisher sites that also load >= 1 blocked third-party tracker."""
    from .defense import match_plain
    from .sitectx import Origin, Relation, classify_relation

    publishers = {d.publisher_etld1 for d in detections}
    if not publishers:
        return 0.0
    with_third_party = set()
    for visit in corpus:
        site = visit.site or psl.etld_plus_one_or_none(visit.page_host)
        if site not in publishers or site in with_third_party:
            continue
        try:
            page_origin = Origin.from_url(visit.page_url)
        except Exception:
            continue
        for txn in visit.transactions:
            try:
                target = Origin.from_url(txn.request_url)
            except Exception:
                continue
            relation = classify_relation(page_origin, target, psl)
            if relation is Relation.CROSS_SITE and match_plain(
                txn.request_url, relation, rules, site
            ).blocked:
                with_third_party.add(site)
                break
    return len(with_third_party) / len(publishers)
