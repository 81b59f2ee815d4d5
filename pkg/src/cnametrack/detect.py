"""Tracker detection: candidate discovery, feature extraction, signature
matching, and publisher detection with same-site/cross-site context."""

from __future__ import annotations

import enum
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fnmatch import fnmatchcase

from .dnsgraph import CnameChain, DnsRecordStore, IpPool, resolve_chain, uncloaked_target
from .errors import CnameCycle
from .model import ContentClass, HttpTransaction, PageVisit, TrackerSignature
from .sitectx import Origin, PublicSuffixTable, Relation, classify_relation

log = logging.getLogger(__name__)

RESPONSE_SIZE_BUCKET = 100


class Context(enum.Enum):
    SAME_SITE = "same-site"
    CROSS_SITE = "cross-site"


class Mechanism(enum.Enum):
    CNAME = "cname"
    DIRECT_A_RECORD = "direct-a-record"


class Flag(enum.Enum):
    LIKELY_TRACKER = "likely-tracker"
    LIKELY_CDN = "likely-cdn"
    INCONCLUSIVE = "inconclusive"


@dataclass
class CandidateAggregate:
    """Per-target request statistics driving assisted detection."""

    target_etld1: str
    sites: set[str] = field(default_factory=set)
    hostnames: set[str] = field(default_factory=set)
    requests_per_site: dict[str, int] = field(default_factory=dict)
    paths_per_site: dict[str, set[str]] = field(default_factory=dict)
    total_requests: int = 0
    requests_sending_cookie: int = 0
    responses_setting_cookie: int = 0
    content_type_counts: dict[ContentClass, int] = field(default_factory=dict)
    response_size_buckets: set[int] = field(default_factory=set)

    @property
    def site_count(self) -> int:
        return len(self.sites)

    @property
    def hostname_count(self) -> int:
        return len(self.hostnames)

    def record(self, site: str, txn: HttpTransaction):
        self.sites.add(site)
        self.hostnames.add(txn.host)
        self.requests_per_site[site] = self.requests_per_site.get(site, 0) + 1
        self.paths_per_site.setdefault(site, set()).add(txn.path_and_query)
        self.total_requests += 1
        if txn.request_cookies:
            self.requests_sending_cookie += 1
        if txn.set_cookies:
            self.responses_setting_cookie += 1
        cls = txn.content_type_class
        self.content_type_counts[cls] = self.content_type_counts.get(cls, 0) + 1
        self.response_size_buckets.add(txn.response_size // RESPONSE_SIZE_BUCKET)


@dataclass(frozen=True)
class FeatureVector:
    sites: int
    hostnames: int
    mean_unique_paths_per_site: float
    mean_requests_per_site: float
    pct_responses_setting_cookie: float
    pct_requests_sending_cookie: float
    bucket_count: int
    content_type_shares: tuple[tuple[str, float], ...]


@dataclass(frozen=True)
class HeuristicThresholds:
    """Advisory cut-offs for the assisted-detection heuristic."""

    tracker_max_buckets: int = 5
    tracker_min_set_cookie_pct: float = 50.0
    tracker_max_requests_per_site: float = 5.0
    cdn_min_paths_per_site: float = 5.0
    cdn_min_buckets: int = 10


@dataclass(frozen=True)
class TransactionRef:
    visit_id: str
    index: int
    url: str
    host: str


@dataclass
class PublisherDetection:
    publisher_etld1: str
    tracker_id: str
    context: Context
    evidence: list[TransactionRef]
    cloaking_mechanism: Mechanism

    def sort_key(self):
        return (self.publisher_etld1, self.tracker_id, self.context.value)


class ChainCache:
    """Memoized chain resolution over one immutable DNS snapshot."""

    def __init__(self, store: DnsRecordStore, max_depth: int = 10):
        self.store = store
        self.max_depth = max_depth
        self._cache: dict[str, CnameChain | None] = {}

    def get(self, host: str) -> CnameChain | None:
        host = host.lower().rstrip(".")
        if host not in self._cache:
            try:
                self._cache[host] = resolve_chain(host, self.store, self.max_depth)
            except CnameCycle as exc:
                log.warning("skipping host with CNAME cycle: %s", exc)
                self._cache[host] = None
        return self._cache[host]


def candidate_scan(
    corpus: list[PageVisit],
    dns: DnsRecordStore,
    psl: PublicSuffixTable,
    min_sites: int = 100,
    max_depth: int = 10,
) -> list[CandidateAggregate]:
    """Aggregate same-site (non-same-origin) requests whose host uncloaks to a
    different eTLD+1, grouped by the uncloaked target."""
    chains = ChainCache(dns, max_depth)
    aggregates: dict[str, CandidateAggregate] = {}
    for visit in corpus:
        try:
            page_origin = Origin.from_url(visit.page_url)
        except Exception:
            continue
        site = visit.site or psl.etld_plus_one_or_none(visit.page_host)
        if site is None:
            continue
        for txn in visit.transactions:
            try:
                target_origin = Origin.from_url(txn.request_url)
            except Exception:
                continue
            relation = classify_relation(page_origin, target_origin, psl)
            if relation is not Relation.SAME_SITE:
                continue
            chain = chains.get(txn.host)
            if chain is None:
                continue
            target = uncloaked_target(chain, psl)
            if target is None:
                continue
            agg = aggregates.setdefault(target, CandidateAggregate(target))
            agg.record(site, txn)
    result = [a for a in aggregates.values() if a.site_count >= min_sites]
    result.sort(key=lambda a: (-a.site_count, a.target_etld1))
    return result


def extract_features(agg: CandidateAggregate) -> FeatureVector:
    """Summarize a candidate aggregate into the assisted-detection features."""
    nsites = max(agg.site_count, 1)
    total = max(agg.total_requests, 1)
    shares = tuple(
        (cls.value, agg.content_type_counts.get(cls, 0) / total)
        for cls in ContentClass
        if agg.content_type_counts.get(cls, 0)
    )
    return FeatureVector(
        sites=agg.site_count,
        hostnames=agg.hostname_count,
        mean_unique_paths_per_site=sum(len(p) for p in agg.paths_per_site.values()) / nsites,
        mean_requests_per_site=sum(agg.requests_per_site.values()) / nsites,
        pct_responses_setting_cookie=100.0 * agg.responses_setting_cookie / total,
        pct_requests_sending_cookie=100.0 * agg.requests_sending_cookie / total,
        bucket_count=len(agg.response_size_buckets),
        content_type_shares=shares,
    )


def heuristic_flag(features: FeatureVector, thresholds: HeuristicThresholds = HeuristicThresholds()) -> Flag:
    """Advisory tracker/CDN call; never gates detection."""
    tracker_votes = 0
    cdn_votes = 0
    if features.bucket_count < thresholds.tracker_max_buckets:
        tracker_votes += 1
    if features.pct_responses_setting_cookie > thresholds.tracker_min_set_cookie_pct:
        tracker_votes += 1
    if features.mean_requests_per_site < thresholds.tracker_max_requests_per_site:
        tracker_votes += 1
    if features.mean_unique_paths_per_site > thresholds.cdn_min_paths_per_site:
        cdn_votes += 1
    if features.bucket_count > thresholds.cdn_min_buckets:
        cdn_votes += 1
    if tracker_votes and cdn_votes:
        return Flag.INCONCLUSIVE
    if tracker_votes >= 2:
        return Flag.LIKELY_TRACKER
    if cdn_votes >= 1:
        return Flag.LIKELY_CDN
    return Flag.INCONCLUSIVE


def signature_match_route(
    txn: HttpTransaction,
    chain: CnameChain | None,
    sig: TrackerSignature,
    pool: IpPool | None = None,
) -> Mechanism | None:
    """How (if at all) a transaction matches a signature.

    CNAME route: any chain hop carries one of the signature's host suffixes.
    IP route: the remote or terminal address sits in the signature's declared
    ranges or the accumulated pool for that tracker.  Either way the request
    path+query must match one of the path patterns.
    """
    if not any(fnmatchcase(txn.path_and_query, pat) for pat in sig.path_patterns):
        return None
    if chain is not None and any(sig.host_matches(hop) for hop in chain.hops):
        return Mechanism.CNAME
    candidates = list(chain.terminal_ips) if chain is not None else []
    if txn.remote_ip:
        candidates.append(txn.remote_ip)
    if candidates:
        import ipaddress

        nets = []
        for cidr in sig.cidr_ranges:
            try:
                nets.append(ipaddress.ip_network(cidr, strict=False))
            except ValueError:
                continue
        for addr in candidates:
            try:
                ip = ipaddress.ip_address(addr)
            except ValueError:
                continue
            if any(ip in net for net in nets):
                return Mechanism.DIRECT_A_RECORD
            if pool is not None and pool.contains(addr, sig.tracker_id):
                return Mechanism.DIRECT_A_RECORD
    return None


def match_signature(
    txn: HttpTransaction,
    chain: CnameChain | None,
    sig: TrackerSignature,
    pool: IpPool | None = None,
) -> bool:
    return signature_match_route(txn, chain, sig, pool) is not None


def _detect_visit(visit, chains, sigs, pool, psl):
    hits = []
    site = visit.site or psl.etld_plus_one_or_none(visit.page_host)
    if site is None:
        return hits
    for idx, txn in enumerate(visit.transactions):
        host = txn.host
        if not host:
            continue
        chain = chains.get(host)
        host_site = psl.etld_plus_one_or_none(host)
        for sig in sigs:
            route = signature_match_route(txn, chain, sig, pool)
            if route is None:
                continue
            context = Context.SAME_SITE if host_site == site else Context.CROSS_SITE
            hits.append((
                site,
                sig.tracker_id,
                context,
                TransactionRef(visit.visit_id, idx, txn.request_url, host),
                route,
            ))
    return hits


def detect_publishers(
    corpus: list[PageVisit],
    dns: DnsRecordStore,
    sigs: list[TrackerSignature],
    pool: IpPool | None,
    psl: PublicSuffixTable,
    max_depth: int = 10,
    threads: int = 1,
) -> list[PublisherDetection]:
    """One detection per (publisher eTLD+1, tracker, context), deterministic order."""
    chains = ChainCache(dns, max_depth)
    # warm the chain cache serially: resolution is cheap and this keeps the
    # per-visit work free of shared mutation
    for visit in corpus:
        for txn in visit.transactions:
            if txn.host:
                chains.get(txn.host)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool_exec:
            per_visit = list(pool_exec.map(
                lambda v: _detect_visit(v, chains, sigs, pool, psl), corpus
            ))
    else:
        per_visit = [_detect_visit(v, chains, sigs, pool, psl) for v in corpus]

    grouped: dict[tuple[str, str, Context], list] = {}
    routes: dict[tuple[str, str, Context], set[Mechanism]] = {}
    for hits in per_visit:
        for site, tracker, context, ref, route in hits:
            key = (site, tracker, context)
            grouped.setdefault(key, []).append(ref)
            routes.setdefault(key, set()).add(route)
    detections = []
    for key in sorted(grouped, key=lambda k: (k[0], k[1], k[2].value)):
        site, tracker, context = key
        mech = Mechanism.CNAME if Mechanism.CNAME in routes[key] else Mechanism.DIRECT_A_RECORD
        evidence = sorted(grouped[key], key=lambda r: (r.visit_id, r.index))
        detections.append(PublisherDetection(site, tracker, context, evidence, mech))
    return detections


def diff_detections(
    a: list[PublisherDetection], b: list[PublisherDetection]
) -> dict[str, dict[str, list[str]]]:
    """Per-tracker publisher site sets present only in one detection run."""
    def site_map(dets):
        out: dict[str, set[str]] = {}
        for d in dets:
            out.setdefault(d.tracker_id, set()).add(d.publisher_etld1)
        return out

    ma, mb = site_map(a), site_map(b)
    diff: dict[str, dict[str, list[str]]] = {}
    for tracker in sorted(set(ma) | set(mb)):
        only_a = sorted(ma.get(tracker, set()) - mb.get(tracker, set()))
        only_b = sorted(mb.get(tracker, set()) - ma.get(tracker, set()))
        if only_a or only_b:
            diff[tracker] = {"only_in_first": only_a, "only_in_second": only_b}
    return diff
