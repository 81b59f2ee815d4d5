"""Command-line entry point wiring all analysis stages.

Subcommands: detect, leaks, defense, history, features, validate, report.
Data goes to files under --out; diagnostics go to stderr.  Exit codes:
0 success, 1 input/config error, 2 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import reports
from .defense import compare_defenses
from .detect import (
    HeuristicThresholds,
    candidate_scan,
    detect_publishers,
    diff_detections,
    extract_features,
    heuristic_flag,
)
from .dnsgraph import IpPool
from .errors import CnametrackError, StaleInputs
from .filterlist import load_filter_list
from .history import MonthDataset, adoption_windows, backward_iterate, cross_validate
from .ingest import load_crawl_jsonl, load_dns, load_har, load_ranking, load_signatures
from .leaks import audit_leaks
from .model import UaLabel
from .sitectx import PublicSuffixTable

log = logging.getLogger("cnametrack")


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--corpus", help="capture JSONL corpus")
    p.add_argument("--har", help="HAR 1.2 capture (alternative corpus input)")
    p.add_argument("--dns", help="DNS snapshot JSONL")
    p.add_argument("--external-dns", help="external DNS month-manifest JSON")
    p.add_argument("--psl", help="public suffix list file (bundled snapshot by default)")
    p.add_argument("--filters", help="Adblock-style filter list")
    p.add_argument("--signatures", help="tracker signature JSON")
    p.add_argument("--ranking", help="rank,domain CSV")
    p.add_argument("--months", help="month-manifest JSON for historical runs")
    p.add_argument("--min-sites", type=int, default=100)
    p.add_argument("--max-depth", type=int, default=10)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--ua-label", choices=["chrome", "safari", "other"],
                   help="restrict corpus to one user-agent label")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--format", default="json,csv", help="output formats (informational)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cnametrack")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        _add_common(p)
        if name == "report":
            p.add_argument("--rank-bins", type=int, default=10000)
        p.set_defaults(func=fn)
    return parser


def _require(args, *names):
    for name in names:
        if getattr(args, name.replace("-", "_"), None) is None:
            raise CnametrackError(f"missing required flag --{name}")


def _load_psl(args) -> PublicSuffixTable:
    if args.psl:
        return PublicSuffixTable.from_file(args.psl)
    return PublicSuffixTable.bundled()


def _load_corpus(args, psl):
    if args.corpus:
        visits = load_crawl_jsonl(args.corpus, psl)
    elif args.har:
        visits = load_har(args.har, psl)
    else:
        raise CnametrackError("missing required flag --corpus (or --har)")
    if args.ua_label:
        wanted = {"chrome": UaLabel.CHROME_LIKE, "safari": UaLabel.SAFARI_LIKE,
                  "other": UaLabel.OTHER}[args.ua_label]
        visits = [v for v in visits if v.user_agent_label is wanted]
    return visits


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _inputs(args) -> dict[str, str]:
    return {k: getattr(args, k) for k in
            ("corpus", "har", "dns", "psl", "filters", "signatures", "ranking", "months")
            if getattr(args, k, None)}


def _config(args) -> dict:
    return {"min_sites": args.min_sites, "max_depth": args.max_depth,
            "ua_label": args.ua_label, "format": args.format}


def _detection_pipeline(args, psl):
    _require(args, "dns", "signatures")
    corpus = _load_corpus(args, psl)
    dns = load_dns(args.dns)
    sigs = load_signatures(args.signatures)
    pool = IpPool()
    for sig in sigs:
        for cidr in sig.cidr_ranges:
            pool.add_range(cidr, sig.tracker_id)
    detections = detect_publishers(corpus, dns, sigs, pool, psl,
                                   max_depth=args.max_depth, threads=args.threads)
    return corpus, dns, sigs, pool, detections


def cmd_detect(args) -> int:
    """Detect CNAME-tracking publishers and write publishers.json + summary.csv."""
    psl = _load_psl(args)
    corpus, dns, sigs, pool, detections = _detection_pipeline(args, psl)
    out = _out_dir(args)
    reports.write_detections(detections, out)
    reports.write_manifest(out, _inputs(args), _config(args))
    log.info("wrote %d detections to %s", len(detections), out)
    return 0


def cmd_leaks(args) -> int:
    """Run the cookie-leak and transport audit over detected tracker traffic."""
    psl = _load_psl(args)
    corpus, dns, sigs, pool, detections = _detection_pipeline(args, psl)
    result = audit_leaks(corpus, detections, sigs, psl)
    out = _out_dir(args)
    reports.write_leaks(result, out)
    reports.write_manifest(out, _inputs(args), _config(args))
    log.info("wrote %d leak findings to %s", len(result.findings), out)
    return 0


def cmd_defense(args) -> int:
    """Compare plain / uncloaked / sinkhole blocking over tracker transactions."""
    _require(args, "filters")
    psl = _load_psl(args)
    corpus, dns, sigs, pool, detections = _detection_pipeline(args, psl)
    rules, stats = load_filter_list(args.filters)
    report = compare_defenses(corpus, detections, rules, dns, psl,
                              max_depth=args.max_depth)
    out = _out_dir(args)
    reports.write_defense(report, out)
    reports.write_manifest(out, _inputs(args), _config(args))
    return 0


def _load_month_manifest(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _load_months(args, psl) -> list[MonthDataset]:
    _require(args, "months")
    manifest = _load_month_manifest(args.months)
    months = []
    for entry in manifest:
        months.append(MonthDataset(
            month=entry["month"],
            corpus=load_crawl_jsonl(entry["corpus"], psl),
            dns=load_dns(entry["dns"]),
        ))
    months.sort(key=lambda m: m.month, reverse=True)
    return months


def cmd_history(args) -> int:
    """Backward-iterating monthly detection with IP-pool accumulation."""
    _require(args, "signatures")
    psl = _load_psl(args)
    sigs = load_signatures(args.signatures)
    months = _load_months(args, psl)
    monthly = backward_iterate(months, sigs, psl, max_depth=args.max_depth,
                               threads=args.threads)
    out = _out_dir(args)
    import csv as _csv

    with open(out / "timeline.csv", "w", newline="", encoding="utf-8") as fh:
        w = _csv.writer(fh)
        w.writerow(["month", "tracker", "same_site_count", "cross_site_count"])
        rows = {}
        for m in monthly:
            for pub, tracker, ctx in m.publishers:
                key = (m.month, tracker)
                rows.setdefault(key, [0, 0])
                rows[key][0 if ctx.value == "same-site" else 1] += 1
        for (month, tracker), (s, c) in sorted(rows.items()):
            w.writerow([month, tracker, s, c])
    for m in monthly:
        reports.write_json(
            {"month": m.month, "pool": m.pool_snapshot,
             "detections": [reports.detection_to_dict(d) for d in m.detections]},
            out / f"month_{m.month}.json",
        )
    adoptions = adoption_windows(monthly)
    reports.write_json({"adoptions": [
        {"publisher": p, "tracker": t, "month": mo} for p, t, mo in adoptions
    ]}, out / "adoptions.json")
    reports.write_manifest(out, _inputs(args), _config(args))
    return 0


def cmd_features(args) -> int:
    """Candidate discovery and assisted-detection feature extraction."""
    _require(args, "dns")
    psl = _load_psl(args)
    corpus = _load_corpus(args, psl)
    dns = load_dns(args.dns)
    candidates = candidate_scan(corpus, dns, psl, min_sites=args.min_sites,
                                max_depth=args.max_depth)
    rows = []
    for agg in candidates:
        fv = extract_features(agg)
        rows.append({
            "target": agg.target_etld1,
            "sites": fv.sites,
            "hostnames": fv.hostnames,
            "mean_unique_paths_per_site": fv.mean_unique_paths_per_site,
            "mean_requests_per_site": fv.mean_requests_per_site,
            "pct_responses_setting_cookie": fv.pct_responses_setting_cookie,
            "pct_requests_sending_cookie": fv.pct_requests_sending_cookie,
            "bucket_count": fv.bucket_count,
            "flag": heuristic_flag(fv).value,
        })
    out = _out_dir(args)
    reports.write_json({"candidates": rows}, out / "features.json")
    reports.write_manifest(out, _inputs(args), _config(args))
    return 0


def cmd_validate(args) -> int:
    """Cross-validate historical detections against external DNS data."""
    _require(args, "signatures", "external_dns")
    psl = _load_psl(args)
    sigs = load_signatures(args.signatures)
    months = _load_months(args, psl)
    pool = IpPool()
    monthly = backward_iterate(months, sigs, psl, max_depth=args.max_depth,
                               pool=pool)
    ext_manifest = _load_month_manifest(args.external_dns)
    external = {month: load_dns(path) for month, path in ext_manifest.items()}
    report = cross_validate(monthly, external, {m.month: m for m in months},
                            sigs, pool, psl, max_depth=args.max_depth)
    out = _out_dir(args)
    reports.write_json({"correctness": report.correctness,
                        "completeness": report.completeness},
                       out / "validation.json")
    reports.write_manifest(out, _inputs(args), _config(args))
    return 0


def cmd_report(args) -> int:
    """Render rank bins, tracker summary, leak rollup and defense matrix."""
    psl = _load_psl(args)
    out = _out_dir(args)
    if not reports.check_manifest(out):
        raise StaleInputs(f"inputs changed since the manifest in {out} was written")
    pubs_path = out / "publishers.json"
    if not pubs_path.exists():
        raise CnametrackError(f"no publishers.json in {out}; run detect first")
    with open(pubs_path, encoding="utf-8") as fh:
        doc = json.load(fh)
    from .detect import Context, Mechanism, PublisherDetection, TransactionRef

    detections = [
        PublisherDetection(
            d["publisher"], d["tracker"], Context(d["context"]),
            [TransactionRef(e["visit_id"], e["index"], e["url"], e["host"])
             for e in d["evidence"]],
            Mechanism(d["mechanism"]),
        )
        for d in doc["detections"]
    ]
    if args.ranking:
        ranking = load_ranking(args.ranking)
        bins = reports.rank_bins(detections, ranking, bin_size=args.rank_bins)
        reports.write_rank_bins(bins, out)
    if args.corpus and args.filters:
        corpus = _load_corpus(args, psl)
        rules, _stats = load_filter_list(args.filters)
        frac = reports.cooccurrence_fraction(corpus, detections, rules, psl)
        reports.write_json({"third_party_cooccurrence_fraction": frac},
                           out / "cooccurrence.json")
    return 0


COMMANDS = {
    "detect": cmd_detect,
    "leaks": cmd_leaks,
    "defense": cmd_defense,
    "history": cmd_history,
    "features": cmd_features,
    "validate": cmd_validate,
    "report": cmd_report,
}


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CnametrackError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except AssertionError as exc:
        print(f"internal invariant violation: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
