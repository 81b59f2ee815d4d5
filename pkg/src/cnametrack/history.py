"""Historical reconstruction: backward month-by-month detection with IP-pool
accumulation, cross-validation against external DNS data, and adoption-window
analytics."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .detect import (
    Context,
    Mechanism,
    PublisherDetection,
    detect_publishers,
)
from .dnsgraph import DnsRecordStore, IpPool, accumulate_ips, resolve_chain
from .errors import CnameCycle, NonContiguousMonths
from .filterlist import FilterRule
from .model import PageVisit, TrackerSignature
from .sitectx import PublicSuffixTable

log = logging.getLogger(__name__)

ADOPTION_WINDOW = 6


@dataclass
class MonthDataset:
    month: str  # YYYY-MM
    corpus: list[PageVisit]
    dns: DnsRecordStore


@dataclass
class MonthlyDetection:
    month: str
    detections: list[PublisherDetection]
    pool_snapshot: dict

    @property
    def publishers(self) -> set[tuple[str, str, Context]]:
        return {(d.publisher_etld1, d.tracker_id, d.context) for d in self.detections}


def _month_index(month: str) -> int:
    year, mon = month.split("-")
    return int(year) * 12 + int(mon) - 1


def _check_descending_contiguous(months: list[MonthDataset]):
    for prev, cur in zip(months, months[1:]):
        if _month_index(prev.month) - _month_index(cur.month) != 1:
            raise NonContiguousMonths(f"{prev.month} -> {cur.month}")


def _confirmed_hosts(detections: list[PublisherDetection], sigs) -> dict[str, str]:
    hosts: dict[str, str] = {}
    for det in detections:
        for ref in det.evidence:
            hosts.setdefault(ref.host, det.tracker_id)
    return hosts


def backward_iterate(
    months: list[MonthDataset],
    sigs: list[TrackerSignature],
    psl: PublicSuffixTable,
    max_depth: int = 10,
    threads: int = 1,
    pool: IpPool | None = None,
) -> list[MonthlyDetection]:
    """Detect publishers month by month, newest first, growing the tracker IP
    pool as confirmed tracking domains resolve to new addresses.

    A caller-supplied pool is mutated in place so the accumulated addresses
    can be reused (e.g. by cross_validate)."""
    if not months:
        return []
    _check_descending_contiguous(months)
    if pool is None:
        pool = IpPool()
    declared = {s.tracker_id: list(s.cidr_ranges) for s in sigs if s.cidr_ranges}
    confirmed: dict[str, str] = {}
    out: list[MonthlyDetection] = []
    for month_ds in months:
        # fold addresses that already-confirmed tracking domains resolve to in
        # this month's data into the pool, then detect
        accumulate_ips(confirmed, month_ds.dns, declared, pool, month_ds.month)
        detections = detect_publishers(
            month_ds.corpus, month_ds.dns, sigs, pool, psl,
            max_depth=max_depth, threads=threads,
        )
        new_hosts = _confirmed_hosts(detections, sigs)
        # remote addresses observed on confirmed tracking transactions also
        # count as tracker-used IPs
        by_visit = {v.visit_id: v for v in month_ds.corpus}
        for det in detections:
            for ref in det.evidence:
                visit = by_visit.get(ref.visit_id)
                if visit is None:
                    continue
                txn = visit.transactions[ref.index]
                if txn.remote_ip:
                    try:
                        pool.add_address(txn.remote_ip, det.tracker_id, month_ds.month)
                    except ValueError:
                        pass
        accumulate_ips(new_hosts, month_ds.dns, {}, pool, month_ds.month)
        confirmed.update(new_hosts)
        out.append(MonthlyDetection(month_ds.month, detections, pool.summary()))
    return out


@dataclass
class ValidationReport:
    """Cross-validation against an external DNS dataset.

    correctness: detected publishers lacking a tracker-pointing CNAME in the
    external data that month, annotated with the suspected reason.
    completeness: external-CNAME domains we did not detect, partitioned into
    disjoint buckets.
    """

    correctness: list[dict]
    completeness: dict[str, list[dict]]


def _external_tracker_chain(host, store, sigs, max_depth=10):
    """Signature whose suffix the host's external chain reaches, if any."""
    try:
        chain = resolve_chain(host, store, max_depth)
    except CnameCycle:
        return None, None
    for sig in sigs:
        if any(sig.host_matches(hop) for hop in chain.hops):
            return sig, chain
    return None, chain


def _near_miss_suffix(host: str, sigs: list[TrackerSignature]) -> str | None:
    """Known tracker suffix within edit distance 1 of the host's suffix part."""
    for sig in sigs:
        for suffix in sig.cname_suffixes:
            for i in range(len(host) - len(suffix) + 1):
                part = host[i:i + len(suffix)]
                if part == suffix:
                    continue
                if sum(a != b for a, b in zip(part, suffix)) == 1 and (
                    i == 0 or host[i - 1] == "."
                ):
                    return suffix
    return None


def cross_validate(
    monthly: list[MonthlyDetection],
    external_dns: dict[str, DnsRecordStore],
    months_data: dict[str, MonthDataset],
    sigs: list[TrackerSignature],
    pool: IpPool | None,
    psl: PublicSuffixTable,
    max_depth: int = 10,
) -> ValidationReport:
    ordered_months = sorted(external_dns)
    correctness: list[dict] = []
    buckets: dict[str, list[dict]] = {
        "absent-from-corpus": [],
        "no-tracking-request": [],
        "signature-mismatch": [],
        "ip-outside-pool": [],
    }
    sig_by_id = {s.tracker_id: s for s in sigs}

    for monthly_det in monthly:
        month = monthly_det.month
        ext = external_dns.get(month)
        if ext is None:
            continue
        for det in monthly_det.detections:
            for host in sorted({r.host for r in det.evidence}):
                sig, chain = _external_tracker_chain(host, ext, sigs, max_depth)
                if sig is not None:
                    continue  # external data agrees
                entry = {"month": month, "publisher": det.publisher_etld1,
                         "tracker": det.tracker_id, "host": host}
                if chain is None or (not chain.hops and not chain.terminal_ips):
                    later = [m for m in ordered_months if m > month]
                    appears_later = any(
                        _external_tracker_chain(host, external_dns[m], sigs, max_depth)[0]
                        for m in later
                    )
                    entry["reason"] = "timing-gap" if appears_later else "missing-external-data"
                else:
                    typo = next(
                        (s for hop in chain.hops if (s := _near_miss_suffix(hop, sigs))),
                        None,
                    )
                    if typo:
                        entry["reason"] = "typo-domain"
                        entry["expected_suffix"] = typo
                    elif pool is not None and any(
                        pool.contains(ip, det.tracker_id) for ip in chain.terminal_ips
                    ):
                        entry["reason"] = "stale-cname"
                    else:
                        entry["reason"] = "unexplained"
                correctness.append(entry)

    detected_hosts: dict[str, set[str]] = {}
    for monthly_det in monthly:
        hosts = detected_hosts.setdefault(monthly_det.month, set())
        for det in monthly_det.detections:
            hosts.update(r.host for r in det.evidence)

    for month, ext in sorted(external_dns.items()):
        month_ds = months_data.get(month)
        corpus_hosts: dict[str, list] = {}
        if month_ds:
            for visit in month_ds.corpus:
                for txn in visit.transactions:
                    corpus_hosts.setdefault(txn.host, []).append(txn)
        for host in sorted(ext.hostnames()):
            sig, chain = _external_tracker_chain(host, ext, sigs, max_depth)
            if sig is None:
                continue
            if host in detected_hosts.get(month, set()):
                continue
            entry = {"month": month, "host": host, "tracker": sig.tracker_id}
            txns = corpus_hosts.get(host)
            if not txns:
                buckets["absent-from-corpus"].append(entry)
            else:
                from fnmatch import fnmatchcase

                path_hit = any(
                    fnmatchcase(t.path_and_query, pat)
                    for t in txns for pat in sig.path_patterns
                )
                if not path_hit:
                    has_any_request = any(t.method for t in txns)
                    # requests exist but none matches the tracking signature;
                    # distinguish "no tracking-shaped request at all" from a
                    # near-miss on the pattern
                    tracking_shaped = any(
                        any(t.path_and_query.startswith(pat.split("*")[0]) for t in txns)
                        for pat in sig.path_patterns if pat.split("*")[0]
                    )
                    if tracking_shaped:
                        buckets["signature-mismatch"].append(entry)
                    else:
                        buckets["no-tracking-request"].append(entry)
                else:
                    buckets["ip-outside-pool"].append(entry)
    return ValidationReport(correctness, buckets)


def adoption_windows(
    monthly: list[MonthlyDetection], window: int = ADOPTION_WINDOW
) -> list[tuple[str, str, str]]:
    """(publisher, tracker, adoption month) for publishers absent `window`
    consecutive months then present for the following `window` months."""
    by_month = sorted(monthly, key=lambda m: m.month)
    months = [m.month for m in by_month]
    presence: dict[tuple[str, str], list[bool]] = {}
    keys = set()
    for m in by_month:
        for pub, tracker, _ctx in m.publishers:
            keys.add((pub, tracker))
    for key in keys:
        presence[key] = [
            any((key[0], key[1]) == (p, t) for p, t, _c in m.publishers)
            for m in by_month
        ]
    events = []
    for (pub, tracker), bits in sorted(presence.items()):
        for i in range(window, len(bits) - window + 1):
            if not any(bits[i - window:i]) and all(bits[i:i + window]):
                events.append((pub, tracker, months[i]))
    return events


def third_party_trend(
    months_data: dict[str, MonthDataset],
    adoptions: list[tuple[str, str, str]],
    rules: list[FilterRule],
    psl: PublicSuffixTable,
    window: int = ADOPTION_WINDOW,
) -> dict[int, float]:
    """Mean distinct blocked third-party tracker eTLD+1s per month offset
    around adoption (offset 0 = adoption month)."""
    from .defense import match_plain
    from .sitectx import Origin, Relation, classify_relation

    per_offset: dict[int, list[int]] = {o: [] for o in range(-window, window)}
    month_keys = sorted(months_data)
    for pub, _tracker, adoption_month in adoptions:
        base = _month_index(adoption_month)
        for offset in range(-window, window):
            month = None
            for key in month_keys:
                if _month_index(key) == base + offset:
                    month = key
                    break
            if month is None:
                continue
            trackers: set[str] = set()
            for visit in months_data[month].corpus:
                site = visit.site or psl.etld_plus_one_or_none(visit.page_host)
                if site != pub:
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
                    if relation is not Relation.CROSS_SITE:
                        continue
                    if match_plain(txn.request_url, relation, rules, site).blocked:
                        t_site = psl.etld_plus_one_or_none(txn.host)
                        if t_site:
                            trackers.add(t_site)
            per_offset[offset].append(len(trackers))
    return {
        o: (sum(vals) / len(vals) if vals else 0.0)
        for o, vals in sorted(per_offset.items())
    }
