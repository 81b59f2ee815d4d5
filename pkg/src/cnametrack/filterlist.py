"""Adblock-style filter list parsing and network-rule matching.

Supported subset: domain anchors (``||example.com^``), plain URL patterns
with ``*`` wildcards, ``^`` separators and ``|`` anchors, exception rules
(``@@`` prefix) and the options ``third-party``, ``~third-party`` /
``first-party`` and ``domain=``.  Cosmetic rules, regex rules and any rule
carrying an unsupported option are kept but marked inert.
"""

from __future__ import annotations

import enum
import logging
import re
from dataclasses import dataclass, field

from .sitectx import Relation

log = logging.getLogger(__name__)

_SEPARATOR = r"(?:[^a-zA-Z0-9_.%-]|$)"
_SCHEME = r"^[a-z][a-z0-9+.-]*://"

SUPPORTED_OPTIONS = {"third-party", "~third-party", "first-party", "script", "image"}


class RuleKind(enum.Enum):
    DOMAIN_ANCHOR = "domain-anchor"
    PLAIN_PATTERN = "plain-pattern"
    EXCEPTION = "exception"


@dataclass
class FilterRule:
    raw: str
    kind: RuleKind
    domain: str | None = None
    options: frozenset[str] = frozenset()
    domain_option: tuple[str, ...] = ()  # domain= values, "~"-prefixed excludes
    inert: bool = False
    regex: re.Pattern | None = None

    @property
    def is_exception(self) -> bool:
        return self.kind is RuleKind.EXCEPTION

    @property
    def pure_domain(self) -> bool:
        """True for ``||domain^`` rules with no extra pattern or options."""
        return (
            self.domain is not None
            and not self.options
            and not self.domain_option
            and re.fullmatch(r"@?@?\|\|[^/^*|$]+\^?", self.raw.split("$")[0]) is not None
        )

    def matches(self, url: str, relation: Relation, page_site: str | None = None) -> bool:
        if self.inert or self.regex is None:
            return False
        if "third-party" in self.options and relation is not Relation.CROSS_SITE:
            return False
        if "first-party" in self.options and relation is Relation.CROSS_SITE:
            return False
        if self.domain_option:
            includes = [d for d in self.domain_option if not d.startswith("~")]
            excludes = [d[1:] for d in self.domain_option if d.startswith("~")]
            if page_site is None:
                return False
            if includes and page_site not in includes:
                return False
            if page_site in excludes:
                return False
        return self.regex.search(url) is not None


def _translate_pattern(pattern: str) -> str:
    out: list[str] = []
    for ch in pattern:
        if ch == "*":
            out.append(".*")
        elif ch == "^":
            out.append(_SEPARATOR)
        else:
            out.append(re.escape(ch))
    return "".join(out)


def parse_rule(line: str) -> FilterRule | None:
    """Parse one non-comment, non-cosmetic line; None when unparseable."""
    raw = line
    exception = line.startswith("@@")
    if exception:
        line = line[2:]

    options: set[str] = set()
    domain_option: tuple[str, ...] = ()
    inert = False
    if "$" in line:
        line, _, opts = line.rpartition("$")
        for opt in opts.split(","):
            opt = opt.strip()
            if not opt:
                continue
            if opt.startswith("domain="):
                domain_option = tuple(opt[len("domain="):].split("|"))
            elif opt == "~third-party":
                options.add("first-party")
            elif opt in SUPPORTED_OPTIONS:
                options.add(opt)
            else:
                inert = True

    if not line:
        return None
    if line.startswith("/") and line.endswith("/") and len(line) > 2:
        inert = True  # regex rules out of the supported subset

    domain = None
    if line.startswith("||"):
        body = line[2:]
        m = re.match(r"^([a-z0-9_.-]+)", body, re.IGNORECASE)
        if not m:
            return None
        domain = m.group(1).lower().rstrip(".")
        rest = body[m.end():]
        pattern = _SCHEME + r"(?:[^/?#]*\.)?" + re.escape(domain) + _translate_pattern(rest or "^")
        kind = RuleKind.DOMAIN_ANCHOR
    else:
        anchored_start = line.startswith("|")
        anchored_end = line.endswith("|")
        body = line.strip("|")
        pattern = _translate_pattern(body)
        if anchored_start:
            pattern = "^" + pattern
        if anchored_end:
            pattern = pattern + "$"
        kind = RuleKind.PLAIN_PATTERN

    if exception:
        kind = RuleKind.EXCEPTION
    regex = None if inert else re.compile(pattern, re.IGNORECASE)
    return FilterRule(
        raw=raw,
        kind=kind,
        domain=domain,
        options=frozenset(options),
        domain_option=domain_option,
        inert=inert,
        regex=regex,
    )


@dataclass
class FilterListStats:
    rules: int = 0
    comments: int = 0
    cosmetic: int = 0
    inert: int = 0
    unparseable: int = 0


def load_filter_list(path) -> tuple[list[FilterRule], FilterListStats]:
    """Parse a filter list file; never fatal, per-line diagnostics only."""
    rules: list[FilterRule] = []
    stats = FilterListStats()
    with open(path, encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("!") or line.startswith("["):
                stats.comments += 1
                continue
            if "##" in line or "#@#" in line or "#?#" in line:
                stats.cosmetic += 1
                continue
            rule = parse_rule(line)
            if rule is None:
                stats.unparseable += 1
                log.debug("%s:%d: unparseable rule %r", path, lineno, line)
                continue
            if rule.inert:
                stats.inert += 1
                log.debug("%s:%d: unsupported options, rule inert: %r", path, lineno, line)
            rules.append(rule)
            stats.rules += 1
    return rules, stats
