"""Site-context model: registrable domains, origin relations, cookie scoping.

Registrable-domain extraction follows the public-suffix algorithm
(https://publicsuffix.org/list/) over a read-only rule table.  Hosts are
expected in lowercase ASCII/punycode form; no Unicode normalization is done.
"""

from __future__ import annotations

import enum
import ipaddress
import re
from dataclasses import dataclass, field
from importlib import resources

from .errors import DomainAttrOutOfScope, HostIsPublicSuffix, InvalidHostname

_LABEL_RE = re.compile(r"^[a-z0-9_]([a-z0-9_-]{0,61}[a-z0-9_])?$", re.IGNORECASE)

_DEFAULT_PORTS = {"http": 80, "https": 443}


class Relation(enum.Enum):
    SAME_ORIGIN = "same-origin"
    SAME_SITE = "same-site"
    CROSS_SITE = "cross-site"


class SameSitePolicy(enum.Enum):
    NONE = "None"
    LAX = "Lax"
    STRICT = "Strict"


def is_ip_literal(host: str) -> bool:
    try:
        ipaddress.ip_address(host.strip("[]"))
        return True
    except ValueError:
        return False


def validate_host(host: str) -> str:
    """Lowercase and validate a DNS name; raises InvalidHostname."""
    if not host:
        raise InvalidHostname("empty hostname")
    host = host.lower().rstrip(".")
    if not host or len(host) > 253:
        raise InvalidHostname(f"bad hostname length: {host!r}")
    if is_ip_literal(host):
        return host
    for label in host.split("."):
        if not _LABEL_RE.match(label):
            raise InvalidHostname(f"bad label {label!r} in {host!r}")
    return host


@dataclass(frozen=True)
class Origin:
    """scheme://host:port triple; port defaults from the scheme."""

    scheme: str
    host: str
    port: int = 0

    def __post_init__(self):
        if self.scheme not in _DEFAULT_PORTS:
            raise ValueError(f"unsupported scheme {self.scheme!r}")
        object.__setattr__(self, "host", validate_host(self.host))
        port = self.port or _DEFAULT_PORTS[self.scheme]
        if not 1 <= port <= 65535:
            raise ValueError(f"port out of range: {port}")
        object.__setattr__(self, "port", port)

    @classmethod
    def from_url(cls, url: str) -> "Origin":
        from urllib.parse import urlsplit

        parts = urlsplit(url)
        if parts.scheme not in _DEFAULT_PORTS or not parts.hostname:
            raise InvalidHostname(f"cannot derive origin from {url!r}")
        return cls(parts.scheme, parts.hostname, parts.port or 0)


class PublicSuffixTable:
    """Parsed public-suffix rules; immutable after load, shareable."""

    def __init__(self, rules: dict[str, bool]):
        # rule text (without "!") -> is_exception
        self._rules = rules

    @classmethod
    def from_lines(cls, lines) -> "PublicSuffixTable":
        rules: dict[str, bool] = {}
        for raw in lines:
            line = raw.strip()
            if not line or line.startswith("//"):
                continue
            line = line.split()[0]  # the format allows trailing whitespace+comments
            if line.startswith("!"):
                rules[line[1:].lower()] = True
            else:
                rules[line.lower()] = False
        return cls(rules)

    @classmethod
    def from_file(cls, path) -> "PublicSuffixTable":
        with open(path, encoding="utf-8") as fh:
            return cls.from_lines(fh)

    @classmethod
    def bundled(cls) -> "PublicSuffixTable":
        text = resources.files("cnametrack.data").joinpath("public_suffix_list.dat").read_text("utf-8")
        return cls.from_lines(text.splitlines())

    def _prevailing_rule(self, labels: list[str]) -> tuple[list[str], bool]:
        """Return (rule labels, is_exception) of the prevailing rule."""
        best: tuple[list[str], bool] | None = None
        n = len(labels)
        for i in range(n):
            cand = labels[i:]
            exact = ".".join(cand)
            wild = ".".join(["*"] + cand[1:])
            for key in (exact, wild):
                if key in self._rules:
                    is_exc = self._rules[key]
                    rule_labels = key.split(".")
                    if is_exc:
                        return rule_labels, True
                    if best is None or len(rule_labels) > len(best[0]):
                        best = (rule_labels, False)
        if best is None:
            return ["*"], False  # implicit rule: unknown TLD is a one-label suffix
        return best

    def public_suffix(self, host: str) -> str:
        """Public suffix of a validated lowercase host."""
        labels = host.split(".")
        rule, is_exc = self._prevailing_rule(labels)
        width = len(rule) - 1 if is_exc else len(rule)
        return ".".join(labels[-width:])

    def etld_plus_one(self, host: str) -> str:
        """Registrable domain (eTLD+1) of host.

        Raises InvalidHostname for syntactically bad hosts and
        HostIsPublicSuffix when host is itself a suffix or an IP literal.
        """
        host = validate_host(host)
        if is_ip_literal(host):
            raise HostIsPublicSuffix(f"IP literal has no registrable domain: {host}")
        suffix = self.public_suffix(host)
        if host == suffix:
            raise HostIsPublicSuffix(host)
        labels = host.split(".")
        width = len(suffix.split(".")) + 1
        if len(labels) < width:
            raise HostIsPublicSuffix(host)
        return ".".join(labels[-width:])

    def etld_plus_one_or_none(self, host: str) -> str | None:
        try:
            return self.etld_plus_one(host)
        except (InvalidHostname, HostIsPublicSuffix):
            return None


def etld_plus_one(host: str, psl: PublicSuffixTable) -> str:
    return psl.etld_plus_one(host)


def classify_relation(page: Origin, target: Origin, psl: PublicSuffixTable) -> Relation:
    """Same-origin iff scheme/host/port all equal; same-site iff eTLD+1 equal."""
    if page == target:
        return Relation.SAME_ORIGIN
    if is_ip_literal(page.host) or is_ip_literal(target.host):
        return Relation.SAME_SITE if page.host == target.host else Relation.CROSS_SITE
    if psl.etld_plus_one(page.host) == psl.etld_plus_one(target.host):
        return Relation.SAME_SITE
    return Relation.CROSS_SITE


@dataclass(frozen=True)
class CookieAttributes:
    """One parsed cookie with its Set-Cookie / document.cookie attributes."""

    name: str
    value: str
    domain_attr: str | None = None
    path: str = "/"
    secure: bool = False
    same_site: SameSitePolicy = SameSitePolicy.NONE
    expires: str | None = None  # raw Expires value or Max-Age derived marker
    max_age: int | None = None

    @property
    def host_only(self) -> bool:
        return self.domain_attr is None

    @property
    def is_session(self) -> bool:
        return self.expires is None and self.max_age is None


def parse_set_cookie(header: str) -> CookieAttributes:
    """Parse a Set-Cookie header value (or document.cookie assignment string)."""
    parts = [p.strip() for p in header.split(";")]
    name, _, value = parts[0].partition("=")
    kwargs: dict = {"name": name.strip(), "value": value.strip()}
    for attr in parts[1:]:
        key, _, val = attr.partition("=")
        key = key.strip().lower()
        val = val.strip()
        if key == "domain" and val:
            kwargs["domain_attr"] = val.lstrip(".").lower()
        elif key == "path" and val:
            kwargs["path"] = val
        elif key == "secure":
            kwargs["secure"] = True
        elif key == "samesite" and val:
            try:
                kwargs["same_site"] = SameSitePolicy(val.capitalize())
            except ValueError:
                pass
        elif key == "expires" and val:
            kwargs["expires"] = val
        elif key == "max-age" and val:
            try:
                kwargs["max_age"] = int(val)
            except ValueError:
                pass
    return CookieAttributes(**kwargs)


def _domain_match(request_host: str, domain: str) -> bool:
    return request_host == domain or request_host.endswith("." + domain)


def _path_match(request_path: str, cookie_path: str) -> bool:
    if request_path == cookie_path:
        return True
    if request_path.startswith(cookie_path):
        return cookie_path.endswith("/") or request_path[len(cookie_path)] == "/"
    return False


def cookie_attaches(
    cookie: CookieAttributes,
    set_on: Origin,
    request: Origin,
    relation: Relation,
    psl: PublicSuffixTable,
    request_path: str = "/",
) -> bool:
    """Would the browser attach this cookie to a subresource request?

    Models domain-match, path-match, the Secure constraint, and SameSite for
    subresource loads (Lax/Strict both block cross-site; top-level navigation
    is out of model for crawl data).
    """
    if cookie.domain_attr is not None:
        if not _domain_match(set_on.host, cookie.domain_attr):
            raise DomainAttrOutOfScope(f"{cookie.domain_attr} not a suffix of {set_on.host}")
        set_site = psl.etld_plus_one_or_none(set_on.host)
        attr_site = psl.etld_plus_one_or_none(cookie.domain_attr)
        if set_site is None or attr_site != set_site:
            raise DomainAttrOutOfScope(
                f"{cookie.domain_attr} outside site of {set_on.host}"
            )
        if not _domain_match(request.host, cookie.domain_attr):
            return False
    else:
        if request.host != set_on.host:
            return False
    if not _path_match(request_path, cookie.path):
        return False
    if cookie.secure and request.scheme != "https":
        return False
    if cookie.same_site in (SameSitePolicy.LAX, SameSitePolicy.STRICT):
        if relation is Relation.CROSS_SITE:
            return False
    return True
