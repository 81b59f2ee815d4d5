"""cnametrack: batch analysis of CNAME-cloaked tracking in captured crawl
and DNS data — detection, cookie-leak audits, defense evaluation, and
historical reconstruction."""

__version__ = "0.1.0"
