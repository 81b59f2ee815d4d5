"""Loaders for all input corpora: capture JSONL, HAR 1.2, DNS snapshots,
tracker signatures and ranking lists.

Every parser is total: each line yields a record, a counted skip, or a
line-addressed diagnostic, never silent loss.  File formats are documented in
docs/formats.md.
"""

from __future__ import annotations

import json
import logging
from urllib.parse import urlsplit

from .dnsgraph import DnsRecordStore
from .errors import MalformedHar, SchemaViolation
from .model import (
    HttpTransaction,
    IdMarker,
    JsCookieSet,
    PageVisit,
    TrackerSignature,
    UaLabel,
    classify_content_type,
)
from .sitectx import PublicSuffixTable, parse_set_cookie

log = logging.getLogger(__name__)

CAPTURE_SCHEMA_VERSION = 1

_UA_ALIASES = {
    "chrome": UaLabel.CHROME_LIKE,
    "chromelike": UaLabel.CHROME_LIKE,
    "safari": UaLabel.SAFARI_LIKE,
    "safarilike": UaLabel.SAFARI_LIKE,
}


def _parse_cookie_header(value: str) -> list[tuple[str, str]]:
    cookies = []
    for part in value.split(";"):
        part = part.strip()
        if not part:
            continue
        name, _, val = part.partition("=")
        cookies.append((name.strip(), val.strip()))
    return cookies


def _finish_transaction(txn: HttpTransaction):
    """Derive cookie fields from headers once both header maps are in place."""
    for value in txn.header_values("Cookie"):
        txn.request_cookies.extend(_parse_cookie_header(value))
    for value in txn.header_values("Set-Cookie", response=True):
        txn.set_cookies.append(parse_set_cookie(value))
    for value in txn.header_values("Content-Type"):
        txn.post_content_type = value
        break


def _ua_label(value: str | None) -> UaLabel:
    if not value:
        return UaLabel.OTHER
    key = value.strip().lower().replace("-", "").replace("_", "")
    if key in _UA_ALIASES:
        return _UA_ALIASES[key]
    if "safari" in key and "chrome" not in key and "chromium" not in key:
        return UaLabel.SAFARI_LIKE
    if "chrome" in key or "chromium" in key:
        return UaLabel.CHROME_LIKE
    return UaLabel.OTHER


def load_crawl_jsonl(path, psl: PublicSuffixTable | None = None) -> list[PageVisit]:
    """Load the capture JSONL schema (visit / transaction / js_cookie records)."""
    visits: dict[str, PageVisit] = {}
    order: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaViolation(f"bad JSON: {exc}", line=lineno, path=str(path))
            if not isinstance(obj, dict) or "record_type" not in obj:
                raise SchemaViolation("missing record_type", line=lineno, path=str(path))
            rtype = obj["record_type"]
            try:
                if rtype == "visit":
                    _ingest_visit(obj, visits, order, psl)
                elif rtype == "transaction":
                    _ingest_transaction(obj, visits)
                elif rtype == "js_cookie":
                    _ingest_js_cookie(obj, visits)
                else:
                    raise SchemaViolation(f"unknown record_type {rtype!r}")
            except SchemaViolation as exc:
                raise SchemaViolation(str(exc.args[0]), line=lineno, path=str(path)) from None
            except (KeyError, TypeError, ValueError) as exc:
                raise SchemaViolation(f"{rtype} record: {exc}", line=lineno, path=str(path))
    return [visits[v] for v in order]


def _ingest_visit(obj, visits, order, psl):
    version = obj.get("version", CAPTURE_SCHEMA_VERSION)
    if version != CAPTURE_SCHEMA_VERSION:
        raise SchemaViolation(f"unsupported capture version {version}")
    visit_id = obj["visit_id"]
    if visit_id in visits:
        raise SchemaViolation(f"duplicate visit_id {visit_id!r}")
    page_url = obj["page_url"]
    host = (urlsplit(page_url).hostname or "").lower()
    visit = PageVisit(
        page_url=page_url,
        visit_id=visit_id,
        site=psl.etld_plus_one_or_none(host) if psl else None,
        user_agent_label=_ua_label(obj.get("user_agent")),
        month=obj.get("month"),
    )
    visits[visit_id] = visit
    order.append(visit_id)


def _ingest_transaction(obj, visits):
    visit = visits.get(obj["visit_id"])
    if visit is None:
        raise SchemaViolation(f"transaction for unknown visit_id {obj['visit_id']!r}")
    txn = HttpTransaction(
        request_url=obj["url"],
        method=obj.get("method", "GET"),
        request_headers=[tuple(h) for h in obj.get("request_headers", [])],
        response_headers=[tuple(h) for h in obj.get("response_headers", [])],
        status=int(obj.get("status", 0)),
        response_size=int(obj.get("response_size", 0)),
        content_type_class=classify_content_type(obj.get("content_type")),
        remote_ip=obj.get("remote_ip"),
        initiators=tuple(obj.get("initiators", [])),
    )
    if txn.response_size < 0:
        raise SchemaViolation("negative response_size")
    if obj.get("post_body_digest"):
        # pre-truncated capture: keep the declared digest and flag
        txn.post_body = obj.get("post_body")
        txn.post_body_digest = obj["post_body_digest"]
        txn.post_body_truncated = bool(obj.get("post_body_truncated", True))
    else:
        txn.store_post_body(obj.get("post_body"))
    _finish_transaction(txn)
    visit.transactions.append(txn)


def _ingest_js_cookie(obj, visits):
    visit = visits.get(obj["visit_id"])
    if visit is None:
        raise SchemaViolation(f"js_cookie for unknown visit_id {obj['visit_id']!r}")
    assigned = obj["assigned"]
    visit.js_cookie_sets.append(
        JsCookieSet(
            page_url=visit.page_url,
            assigned_string=assigned,
            parsed=parse_set_cookie(assigned),
            stack=tuple(obj.get("stack", [])),
        )
    )


def save_crawl_jsonl(visits: list[PageVisit], path):
    """Serialize visits back to the capture JSONL schema (load fixpoint)."""
    with open(path, "w", encoding="utf-8") as fh:
        for visit in visits:
            fh.write(json.dumps({
                "record_type": "visit",
                "version": CAPTURE_SCHEMA_VERSION,
                "visit_id": visit.visit_id,
                "page_url": visit.page_url,
                "user_agent": visit.user_agent_label.value,
                "month": visit.month,
            }, sort_keys=True) + "\n")
            for txn in visit.transactions:
                rec = {
                    "record_type": "transaction",
                    "visit_id": visit.visit_id,
                    "url": txn.request_url,
                    "method": txn.method,
                    "request_headers": [list(h) for h in txn.request_headers],
                    "response_headers": [list(h) for h in txn.response_headers],
                    "status": txn.status,
                    "response_size": txn.response_size,
                    "content_type": None,
                    "remote_ip": txn.remote_ip,
                    "initiators": list(txn.initiators),
                    "post_body": txn.post_body,
                }
                rec["content_type"] = {
                    "script": "application/javascript",
                    "image": "image/gif",
                    "html": "text/html",
                    "video": "video/mp4",
                    "other": "application/octet-stream",
                }[txn.content_type_class.value]
                if txn.post_body_digest:
                    rec["post_body_digest"] = txn.post_body_digest
                    rec["post_body_truncated"] = txn.post_body_truncated
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
            for jsc in visit.js_cookie_sets:
                fh.write(json.dumps({
                    "record_type": "js_cookie",
                    "visit_id": visit.visit_id,
                    "assigned": jsc.assigned_string,
                    "stack": list(jsc.stack),
                }, sort_keys=True) + "\n")


def load_har(path, psl: PublicSuffixTable | None = None, month: str | None = None) -> list[PageVisit]:
    """Load a HAR 1.2 capture; one PageVisit per page entry."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MalformedHar(f"not JSON: {exc}")
    try:
        har_log = doc["log"]
        pages = har_log.get("pages", [])
        entries = har_log["entries"]
    except (KeyError, TypeError):
        raise MalformedHar("missing log/entries structure")

    visits: dict[str, PageVisit] = {}
    order: list[str] = []
    for page in pages:
        pid = page.get("id") or f"page_{len(order)}"
        url = page.get("title") or page.get("_url") or ""
        host = (urlsplit(url).hostname or "").lower()
        visits[pid] = PageVisit(
            page_url=url,
            visit_id=pid,
            site=psl.etld_plus_one_or_none(host) if psl and host else None,
            month=month,
        )
        order.append(pid)

    timed: list[tuple[str, int, HttpTransaction, str]] = []
    for idx, entry in enumerate(entries):
        try:
            request = entry["request"]
            url = request["url"]
        except (KeyError, TypeError):
            raise MalformedHar("entry missing request.url", entry_index=idx)
        pageref = entry.get("pageref")
        if pageref not in visits:
            if not visits:  # pageless HAR: synthesize one visit per distinct page
                pageref = "page_0"
                visits[pageref] = PageVisit(page_url=url, visit_id=pageref, month=month)
                order.append(pageref)
            else:
                raise MalformedHar(f"unknown pageref {pageref!r}", entry_index=idx)
        txn = HttpTransaction(
            request_url=url,
            method=request.get("method", "GET"),
            request_headers=[(h["name"], h["value"]) for h in request.get("headers", [])],
        )
        response = entry.get("response")
        if response:
            txn.response_headers = [(h["name"], h["value"]) for h in response.get("headers", [])]
            txn.status = int(response.get("status", 0))
            content = response.get("content", {}) or {}
            txn.response_size = max(int(content.get("size", 0) or 0), 0)
            txn.content_type_class = classify_content_type(content.get("mimeType"))
        else:
            log.warning("%s: entry %d has no response; recorded with status 0", path, idx)
        post = request.get("postData")
        if post:
            txn.store_post_body(post.get("text"))
            txn.post_content_type = post.get("mimeType")
        txn.remote_ip = entry.get("serverIPAddress") or None
        initiator = entry.get("_initiator")
        if isinstance(initiator, dict):
            txn.initiators = tuple(
                frame.get("url") for frame in initiator.get("stack", {}).get("callFrames", [])
                if frame.get("url")
            )
        elif isinstance(initiator, str):
            txn.initiators = (initiator,)
        _finish_transaction(txn)
        timed.append((pageref, idx, txn, entry.get("startedDateTime", "")))

    timed.sort(key=lambda item: (item[3], item[1]))
    for pageref, _idx, txn, _t in timed:
        visits[pageref].transactions.append(txn)
    for visit in visits.values():
        for txn in visit.transactions:
            ua = next(iter(txn.header_values("User-Agent")), None)
            if ua:
                visit.user_agent_label = _ua_label(ua)
                break
    return [visits[v] for v in order]


def load_dns(path) -> DnsRecordStore:
    """Load zdns-style line-delimited JSON into a DnsRecordStore."""
    store = DnsRecordStore()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaViolation(f"bad JSON: {exc}", line=lineno, path=str(path))
            if "name" not in obj:
                raise SchemaViolation("missing name", line=lineno, path=str(path))
            answers = obj.get("answers")
            if answers is None:
                answers = (obj.get("data") or {}).get("answers", [])
            month = obj.get("month")
            for ans in answers:
                try:
                    rr_type = ans["type"].upper()
                    owner = ans.get("name", obj["name"])
                    answer = ans["answer"]
                except (KeyError, TypeError, AttributeError):
                    raise SchemaViolation("bad answer record", line=lineno, path=str(path))
                if rr_type in ("A", "AAAA"):
                    store.add(owner, "A", answer, month)
                elif rr_type == "CNAME":
                    store.add(owner, "CNAME", answer, month)
                # other record types are ignored but not an error
    return store


def save_dns_jsonl(store: DnsRecordStore, path):
    """Serialize a DnsRecordStore back to the DNS JSONL format."""
    with open(path, "w", encoding="utf-8") as fh:
        for host in sorted(store.hostnames()):
            answers = [
                {"name": host, "type": rec.rr_type, "answer": rec.answer}
                for rec in store.records(host)
            ]
            months = {rec.snapshot_month for rec in store.records(host)}
            obj = {"name": host, "status": "NOERROR", "answers": answers}
            if len(months) == 1:
                (obj["month"],) = months
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


def load_signatures(path) -> list[TrackerSignature]:
    """Load the tracker signature JSON file."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaViolation(f"bad JSON: {exc}", path=str(path))
    if not isinstance(doc, list):
        raise SchemaViolation("signature file must be a JSON array", path=str(path))
    sigs = []
    for i, entry in enumerate(doc):
        try:
            sigs.append(TrackerSignature(
                tracker_id=entry["tracker_id"],
                cname_suffixes=tuple(s.lower().rstrip(".") for s in entry.get("cname_suffixes", [])),
                cidr_ranges=tuple(entry.get("cidr_ranges", [])),
                path_patterns=tuple(entry.get("path_patterns", [])),
                id_markers=tuple(
                    IdMarker(m["location"], m["name"]) for m in entry.get("id_markers", [])
                ),
                notes=entry.get("notes", ""),
            ))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaViolation(f"signature {i}: {exc}", path=str(path))
    return sigs


def load_ranking(path) -> dict[str, int]:
    """Load a Tranco-style "rank,domain" CSV into a domain -> rank map."""
    import csv

    ranks: dict[str, int] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or (lineno == 1 and not row[0].strip().isdigit()):
                continue  # header or blank
            if len(row) < 2:
                raise SchemaViolation("expected rank,domain", line=lineno, path=str(path))
            try:
                rank = int(row[0])
            except ValueError:
                raise SchemaViolation(f"bad rank {row[0]!r}", line=lineno, path=str(path))
            domain = row[1].strip().lower()
            ranks.setdefault(domain, rank)
    return ranks
