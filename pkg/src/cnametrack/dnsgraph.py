"""DNS snapshot store, CNAME chain resolution, and tracker IP pools."""

from __future__ import annotations

import ipaddress
import logging
from dataclasses import dataclass, field

from .errors import CnameCycle, InvalidCidr
from .sitectx import PublicSuffixTable

log = logging.getLogger(__name__)

DEFAULT_MAX_DEPTH = 10


@dataclass(frozen=True)
class DnsRecord:
    rr_type: str  # "CNAME" or "A" (AAAA stored under "A" semantics)
    answer: str
    snapshot_month: str | None = None  # YYYY-MM


class DnsRecordStore:
    """Hostname -> record set, case-insensitive; immutable after load."""

    def __init__(self):
        self._records: dict[str, list[DnsRecord]] = {}

    def add(self, host: str, rr_type: str, answer: str, month: str | None = None):
        host = host.lower().rstrip(".")
        answer = answer.lower().rstrip(".") if rr_type == "CNAME" else answer
        recs = self._records.setdefault(host, [])
        if rr_type == "CNAME":
            prior = [r for r in recs if r.rr_type == "CNAME" and r.snapshot_month == month]
            if prior:
                if prior[0].answer != answer:
                    log.warning("multiple CNAME answers for %s (%s); keeping first", host, month)
                return
        recs.append(DnsRecord(rr_type, answer, month))

    def __contains__(self, host: str) -> bool:
        return host.lower().rstrip(".") in self._records

    def records(self, host: str) -> list[DnsRecord]:
        return self._records.get(host.lower().rstrip("."), [])

    def cname_target(self, host: str) -> str | None:
        for rec in self.records(host):
            if rec.rr_type == "CNAME":
                return rec.answer
        return None

    def a_records(self, host: str) -> list[str]:
        return [r.answer for r in self.records(host) if r.rr_type == "A"]

    def hostnames(self):
        return self._records.keys()


@dataclass(frozen=True)
class CnameChain:
    """Resolved chain from origin_host through CNAME hops to terminal addresses."""

    origin_host: str
    hops: tuple[str, ...]
    terminal_ips: tuple[str, ...]
    truncated: bool = False

    @property
    def last_hop(self) -> str | None:
        return self.hops[-1] if self.hops else None


def resolve_chain(host: str, store: DnsRecordStore, max_depth: int = DEFAULT_MAX_DEPTH) -> CnameChain:
    """Follow CNAME records until an A record set, a missing record, or the depth cap.

    Raises CnameCycle on a revisited hostname; depth-capped chains come back
    with truncated=True rather than an error.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    host = host.lower().rstrip(".")
    current = host
    hops: list[str] = []
    seen = {host}
    while True:
        target = store.cname_target(current)
        if target is None:
            ips = store.a_records(current)
            truncated = not ips and current not in store
            return CnameChain(host, tuple(hops), tuple(ips), truncated)
        if len(hops) >= max_depth:
            return CnameChain(host, tuple(hops), (), truncated=True)
        if target in seen:
            raise CnameCycle(target, [host] + hops + [target])
        seen.add(target)
        hops.append(target)
        current = target


def uncloaked_target(chain: CnameChain, psl: PublicSuffixTable) -> str | None:
    """eTLD+1 of the last hop when it differs from the origin host's site."""
    if not chain.hops:
        return None
    origin_site = psl.etld_plus_one_or_none(chain.origin_host)
    target_site = psl.etld_plus_one_or_none(chain.last_hop)
    if target_site is None or target_site == origin_site:
        return None
    return target_site


@dataclass(frozen=True)
class PoolMatch:
    tracker_id: str
    ambiguous: bool = False


@dataclass
class _PoolEntry:
    tracker_id: str
    first_seen: str | None  # YYYY-MM; lexicographic order == chronological


class IpPool:
    """Accumulated tracker addresses: single IPs plus CIDR ranges, with provenance."""

    def __init__(self):
        self._singles: dict[ipaddress._BaseAddress, list[_PoolEntry]] = {}
        self._ranges: dict[ipaddress._BaseNetwork, list[_PoolEntry]] = {}

    def _upsert(self, entries: list[_PoolEntry], tracker_id: str, month: str | None):
        for e in entries:
            if e.tracker_id == tracker_id:
                if month is not None and (e.first_seen is None or month < e.first_seen):
                    e.first_seen = month
                return
        entries.append(_PoolEntry(tracker_id, month))

    def add_range(self, cidr: str, tracker_id: str, month: str | None = None):
        try:
            net = ipaddress.ip_network(cidr, strict=False)
        except ValueError as exc:
            raise InvalidCidr(str(exc)) from exc
        self._upsert(self._ranges.setdefault(net, []), tracker_id, month)
        # keep the no-single-covered-by-own-range invariant
        for addr in [a for a in self._singles if a in net]:
            entries = self._singles[addr]
            entries[:] = [e for e in entries if e.tracker_id != tracker_id]
            if not entries:
                del self._singles[addr]

    def add_address(self, addr: str, tracker_id: str, month: str | None = None):
        ip = ipaddress.ip_address(addr)
        for net, entries in self._ranges.items():
            if ip in net and any(e.tracker_id == tracker_id for e in entries):
                return  # already covered by this tracker's range
        self._upsert(self._singles.setdefault(ip, []), tracker_id, month)

    def lookup(self, addr: str) -> PoolMatch | None:
        """Tracker owning an address; lexicographic tie-break when several claim it."""
        try:
            ip = ipaddress.ip_address(addr)
        except ValueError:
            return None
        hits: set[str] = set()
        for e in self._singles.get(ip, []):
            hits.add(e.tracker_id)
        for net, entries in self._ranges.items():
            if ip in net:
                hits.update(e.tracker_id for e in entries)
        if not hits:
            return None
        return PoolMatch(min(hits), ambiguous=len(hits) > 1)

    def contains(self, addr: str, tracker_id: str) -> bool:
        try:
            ip = ipaddress.ip_address(addr)
        except ValueError:
            return False
        if any(e.tracker_id == tracker_id for e in self._singles.get(ip, [])):
            return True
        return any(
            ip in net and any(e.tracker_id == tracker_id for e in entries)
            for net, entries in self._ranges.items()
        )

    def summary(self) -> dict:
        """Deterministic snapshot for reports: per-tracker single/range counts."""
        per: dict[str, dict[str, int]] = {}
        for entries in self._singles.values():
            for e in entries:
                per.setdefault(e.tracker_id, {"singles": 0, "ranges": 0})["singles"] += 1
        for entries in self._ranges.values():
            for e in entries:
                per.setdefault(e.tracker_id, {"singles": 0, "ranges": 0})["ranges"] += 1
        return dict(sorted(per.items()))


def accumulate_ips(
    confirmed_hosts: dict[str, str],
    store: DnsRecordStore,
    declared_ranges: dict[str, list[str]],
    pool: IpPool,
    month: str | None = None,
) -> IpPool:
    """Fold terminal addresses of confirmed tracking hosts into the pool.

    confirmed_hosts maps hostname -> tracker id (hosts whose transactions
    already matched that tracker's signature).  Declared CIDR ranges are added
    verbatim per tracker.
    """
    for tracker_id, cidrs in sorted(declared_ranges.items()):
        for cidr in cidrs:
            pool.add_range(cidr, tracker_id, month)
    for host, tracker_id in sorted(confirmed_hosts.items()):
        chain = resolve_chain(host, store)
        for ip in chain.terminal_ips:
            pool.add_address(ip, tracker_id, month)
    return pool


def ip_in_pool(addr: str, pool: IpPool) -> PoolMatch | None:
    return pool.lookup(addr)
