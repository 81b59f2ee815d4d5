"""Domain model for captured crawl data and tracker signatures."""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from urllib.parse import urlsplit

from .sitectx import CookieAttributes

POST_BODY_PREFIX_LIMIT = 64 * 1024
POST_BODY_DIGEST_THRESHOLD = 1024 * 1024


class ContentClass(enum.Enum):
    SCRIPT = "script"
    IMAGE = "image"
    HTML = "html"
    VIDEO = "video"
    OTHER = "other"


class UaLabel(enum.Enum):
    CHROME_LIKE = "chrome"
    SAFARI_LIKE = "safari"
    OTHER = "other"


def classify_content_type(mime: str | None) -> ContentClass:
    mime = (mime or "").split(";")[0].strip().lower()
    if "javascript" in mime or "ecmascript" in mime:
        return ContentClass.SCRIPT
    if mime.startswith("image/"):
        return ContentClass.IMAGE
    if mime in ("text/html", "application/xhtml+xml"):
        return ContentClass.HTML
    if mime.startswith("video/"):
        return ContentClass.VIDEO
    return ContentClass.OTHER


@dataclass
class HttpTransaction:
    """One captured request/response pair."""

    request_url: str
    method: str = "GET"
    request_headers: list[tuple[str, str]] = field(default_factory=list)
    response_headers: list[tuple[str, str]] = field(default_factory=list)
    request_cookies: list[tuple[str, str]] = field(default_factory=list)
    set_cookies: list[CookieAttributes] = field(default_factory=list)
    post_body: str | None = None
    post_body_digest: str | None = None
    post_body_truncated: bool = False
    post_content_type: str | None = None
    status: int = 0
    response_size: int = 0
    content_type_class: ContentClass = ContentClass.OTHER
    remote_ip: str | None = None
    initiators: tuple[str, ...] = ()

    @property
    def host(self) -> str:
        return (urlsplit(self.request_url).hostname or "").lower()

    @property
    def scheme(self) -> str:
        return urlsplit(self.request_url).scheme.lower()

    @property
    def path_and_query(self) -> str:
        parts = urlsplit(self.request_url)
        path = parts.path or "/"
        return f"{path}?{parts.query}" if parts.query else path

    def header_values(self, name: str, response: bool = False) -> list[str]:
        headers = self.response_headers if response else self.request_headers
        return [v for k, v in headers if k.lower() == name.lower()]

    def store_post_body(self, body: str | None):
        """Bound large POST bodies: digest plus a searchable prefix."""
        if body is None:
            self.post_body = None
            return
        if len(body) > POST_BODY_DIGEST_THRESHOLD:
            self.post_body_digest = hashlib.sha256(body.encode("utf-8", "replace")).hexdigest()
            self.post_body = body[:POST_BODY_PREFIX_LIMIT]
            self.post_body_truncated = True
        else:
            self.post_body = body


@dataclass
class JsCookieSet:
    """One document.cookie assignment captured by script instrumentation."""

    page_url: str
    assigned_string: str
    parsed: CookieAttributes
    stack: tuple[str, ...] = ()

    @property
    def script_origin(self) -> str | None:
        """Host of the script at the top of the stack trace."""
        if not self.stack:
            return None
        return (urlsplit(self.stack[0]).hostname or "").lower()


@dataclass
class PageVisit:
    """One page load: its transactions and instrumentation records."""

    page_url: str
    visit_id: str
    site: str | None = None  # eTLD+1 of the page, filled by the loader when psl given
    user_agent_label: UaLabel = UaLabel.CHROME_LIKE
    month: str | None = None
    transactions: list[HttpTransaction] = field(default_factory=list)
    js_cookie_sets: list[JsCookieSet] = field(default_factory=list)

    @property
    def page_host(self) -> str:
        return (urlsplit(self.page_url).hostname or "").lower()

    @property
    def page_scheme(self) -> str:
        return urlsplit(self.page_url).scheme.lower()


@dataclass(frozen=True)
class IdMarker:
    location: str  # "cookie" | "query" | "post"
    name: str


@dataclass(frozen=True)
class TrackerSignature:
    """Declarative per-tracker matcher."""

    tracker_id: str
    cname_suffixes: tuple[str, ...] = ()
    cidr_ranges: tuple[str, ...] = ()
    path_patterns: tuple[str, ...] = ()
    id_markers: tuple[IdMarker, ...] = ()
    notes: str = ""

    def __post_init__(self):
        if not self.cname_suffixes and not self.cidr_ranges:
            raise ValueError(f"{self.tracker_id}: needs cname_suffixes or cidr_ranges")
        if not self.path_patterns:
            raise ValueError(f"{self.tracker_id}: path_patterns must be non-empty")

    def host_matches(self, host: str) -> bool:
        host = host.lower().rstrip(".")
        return any(host == s or host.endswith("." + s) for s in self.cname_suffixes)
