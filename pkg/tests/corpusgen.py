"""Synthetic corpus builders shared by tests and demo scripts.

Everything here is deterministic: fixtures are built from explicit plans or
seeded RNGs so expected values can be frozen in the tests.
"""

from __future__ import annotations

import json
import random

TRACKER_SIGNATURES = [
    {
        "tracker_id": "eulertrack",
        "cname_suffixes": ["eulertrack.net"],
        "cidr_ranges": ["203.0.113.0/28"],
        "path_patterns": ["/ea/*"],
        "id_markers": [{"location": "cookie", "name": "etuid"}],
        "notes": "synthetic analytics tracker",
    },
    {
        "tracker_id": "pixelstats",
        "cname_suffixes": ["pixelstats.io"],
        "cidr_ranges": [],
        "path_patterns": ["/collect*"],
        "id_markers": [{"location": "query", "name": "pid"}],
        "notes": "synthetic pixel tracker",
    },
]


def visit_record(visit_id, page_url, ua="chrome", month=None):
    return {
        "record_type": "visit",
        "version": 1,
        "visit_id": visit_id,
        "page_url": page_url,
        "user_agent": ua,
        "month": month,
    }


def txn_record(visit_id, url, *, method="GET", status=200, size=250,
               content_type="image/gif", cookie_header=None, set_cookie=None,
               post_body=None, post_content_type=None, remote_ip=None,
               initiators=()):
    request_headers = []
    if cookie_header:
        request_headers.append(["Cookie", cookie_header])
    if post_content_type:
        request_headers.append(["Content-Type", post_content_type])
    response_headers = []
    if set_cookie:
        if isinstance(set_cookie, str):
            set_cookie = [set_cookie]
        for sc in set_cookie:
            response_headers.append(["Set-Cookie", sc])
    return {
        "record_type": "transaction",
        "visit_id": visit_id,
        "url": url,
        "method": method,
        "request_headers": request_headers,
        "response_headers": response_headers,
        "status": status,
        "response_size": size,
        "content_type": content_type,
        "remote_ip": remote_ip,
        "initiators": list(initiators),
        "post_body": post_body,
    }


def js_cookie_record(visit_id, assigned, stack):
    return {
        "record_type": "js_cookie",
        "visit_id": visit_id,
        "assigned": assigned,
        "stack": list(stack),
    }


def write_jsonl(records, path):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    return path


def dns_line(name, answers, month=None):
    obj = {"name": name, "status": "NOERROR",
           "answers": [{"name": a[0], "type": a[1], "answer": a[2]} for a in answers]}
    if month:
        obj["month"] = month
    return obj


def write_signatures(path, sigs=None):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(sigs or TRACKER_SIGNATURES, fh, indent=1)
    return path


# --- planted multi-month world for detection / history tests -----------------

N_PLANTED = 12          # same-site CNAME-tracking publishers
N_DIRECT_A = 2          # of which DirectARecord circumvention
CHURN_SITE = 3          # index of the IP-churn publisher
N_CROSS = 5             # cross-site inclusions
N_CDN = 10              # CDN decoy sites
MONTHS = ["2020-10", "2020-09", "2020-08"]  # descending

TRACKER_IP = "203.0.113.7"       # inside eulertrack /28
CHURN_OLD_IP = "198.18.44.9"     # outside the declared range; learned via pool
PIXEL_IP = "192.0.2.60"          # pixelstats terminal address


def planted_tracker(i):
    # DirectARecord sites must use the tracker with declared CIDR ranges
    if i < N_DIRECT_A:
        return "eulertrack"
    return "eulertrack" if i % 2 == 0 else "pixelstats"


def planted_path(tracker, i):
    return f"/ea/collect?uid=u{i}" if tracker == "eulertrack" else f"/collect?pid=p{i}"


def planted_world():
    """Corpus + DNS records per month, plus the ground-truth detection set.

    12 planted publishers (2 DirectARecord, 1 IP churn), 5 cross-site
    inclusions and 10 CDN decoys, repeated over 3 descending months.
    """
    ground_truth = set()
    corpora = {}
    dns_lines = {}
    for month in MONTHS:
        records = []
        dlines = []
        for i in range(N_PLANTED):
            site = f"site{i:02d}.com"
            host = f"metrics.{site}"
            tracker = planted_tracker(i)
            vid = f"{month}-v{i:02d}"
            records.append(visit_record(vid, f"https://www.{site}/", month=month))
            records.append(txn_record(
                vid, f"https://{host}{planted_path(tracker, i)}",
                set_cookie=f"{'etuid' if tracker == 'eulertrack' else 'pid'}=id{i}value123; "
                           f"Expires=Wed, 01 Jan 2031 00:00:00 GMT",
                remote_ip=TRACKER_IP if tracker == "eulertrack" else PIXEL_IP,
            ))
            ground_truth.add((site, tracker, "same-site"))
            if i < N_DIRECT_A:
                # A record straight to the tracker's address, no CNAME
                dlines.append(dns_line(host, [(host, "A", TRACKER_IP)], month))
            elif i == CHURN_SITE:
                if month == MONTHS[0]:
                    cname = f"c{i}.{tracker}.{'net' if tracker == 'eulertrack' else 'io'}"
                    dlines.append(dns_line(host, [(host, "CNAME", cname)], month))
                    dlines.append(dns_line(cname, [(cname, "A", CHURN_OLD_IP)], month))
                else:
                    # CNAME dropped in older snapshots; only the old address remains
                    dlines.append(dns_line(host, [(host, "A", CHURN_OLD_IP)], month))
            else:
                suffix = "eulertrack.net" if tracker == "eulertrack" else "pixelstats.io"
                cname = f"c{i}.{suffix}"
                dlines.append(dns_line(host, [(host, "CNAME", cname)], month))
                dlines.append(dns_line(
                    cname,
                    [(cname, "A", TRACKER_IP if tracker == "eulertrack" else PIXEL_IP)],
                    month,
                ))
        for j in range(N_CROSS):
            # pages on unrelated sites loading site-j's cloaked tracker host
            site = f"partner{j:02d}.org"
            target_i = j  # reuse planted hosts 0..4
            tracker = planted_tracker(target_i)
            host = f"metrics.site{target_i:02d}.com"
            vid = f"{month}-x{j:02d}"
            records.append(visit_record(vid, f"https://www.{site}/", month=month))
            records.append(txn_record(
                vid, f"https://{host}{planted_path(tracker, target_i)}",
                remote_ip=TRACKER_IP if tracker == "eulertrack" else PIXEL_IP,
            ))
            ground_truth.add((site, tracker, "cross-site"))
        for k in range(N_CDN):
            site = f"shop{k:02d}.net"
            host = f"static.{site}"
            cname = f"edge{k}.fastcdn.net"
            vid = f"{month}-c{k:02d}"
            records.append(visit_record(vid, f"https://www.{site}/", month=month))
            for p in range(8):
                records.append(txn_record(
                    vid, f"https://{host}/assets/v{p}/file{p}.js",
                    content_type="application/javascript",
                    size=500 + 450 * p + 17 * k,
                ))
            dlines.append(dns_line(host, [(host, "CNAME", cname)], month))
            dlines.append(dns_line(cname, [(cname, "A", f"192.0.2.{100 + k}")], month))
        corpora[month] = records
        dns_lines[month] = dlines
    return corpora, dns_lines, ground_truth


# --- feature-direction corpus (tracker-like vs CDN-like services) ------------

def feature_direction_world(n_trackers=20, n_cdns=20, seed=7):
    """Services with tracker-shaped traffic (one path, uniform tiny responses)
    vs CDN-shaped traffic (many paths, spread-out sizes)."""
    rng = random.Random(seed)
    records = []
    dlines = []
    tracker_targets = []
    cdn_targets = []
    vid_n = 0
    for t in range(n_trackers):
        target = f"trk{t:02d}-svc.net"
        tracker_targets.append(target)
        for s in range(3):
            site = f"tsite{t:02d}{s}.com"
            host = f"m.{site}"
            vid = f"f-t{vid_n}"
            vid_n += 1
            records.append(visit_record(vid, f"https://www.{site}/"))
            records.append(txn_record(
                vid, f"https://{host}/p/track.gif?x={rng.randrange(10)}",
                size=90 + rng.randrange(10),
                set_cookie="tid=abcdef; Expires=Wed, 01 Jan 2031 00:00:00 GMT",
            ))
            cname = f"in.{target}"
            dlines.append(dns_line(host, [(host, "CNAME", cname)]))
            dlines.append(dns_line(cname, [(cname, "A", f"198.51.100.{t}")]))
    for c in range(n_cdns):
        target = f"cdn{c:02d}-svc.net"
        cdn_targets.append(target)
        for s in range(3):
            site = f"csite{c:02d}{s}.com"
            host = f"a.{site}"
            vid = f"f-c{vid_n}"
            vid_n += 1
            records.append(visit_record(vid, f"https://www.{site}/"))
            for p in range(8):
                records.append(txn_record(
                    vid, f"https://{host}/lib/v{p}/bundle{rng.randrange(1000)}.js",
                    content_type="application/javascript",
                    size=500 + 450 * p + rng.randrange(300),
                ))
            cname = f"edge.{target}"
            dlines.append(dns_line(host, [(host, "CNAME", cname)]))
            dlines.append(dns_line(cname, [(cname, "A", f"192.0.2.{c}")]))
    return records, dlines, tracker_targets, cdn_targets


# --- leak-audit fixture -------------------------------------------------------

LEAK_TRACKER_SIG = {
    "tracker_id": "eulertrack",
    "cname_suffixes": ["eulertrack.net"],
    "cidr_ranges": [],
    "path_patterns": ["/ea/*"],
    "id_markers": [],
    "notes": "",
}

PERSIST = "Expires=Wed, 01 Jan 2031 00:00:00 GMT"


def leak_world():
    """6 header leaks, 3 POST leaks, 3 URL leaks, 8 decoys.

    Returns (records, dns_lines, expected) where expected maps channel name to
    the set of (site, cookie_name) pairs that must be found.
    """
    records = []
    dlines = []
    expected = {"cookie-header": set(), "post-body": set(), "url-param": set()}

    def add_site(i):
        site = f"leak{i:02d}.com"
        host = f"track.{site}"
        cname = f"l{i}.eulertrack.net"
        dlines.append(dns_line(host, [(host, "CNAME", cname)]))
        dlines.append(dns_line(cname, [(cname, "A", "203.0.113.20")]))
        return site, host

    n = 0
    # 6 CookieHeader leaks: persistent first-party cookie forwarded to tracker
    for i in range(6):
        site, host = add_site(n)
        vid = f"lv{n}"
        value = f"ga1.2.leakvalue{n:04d}"
        records.append(visit_record(vid, f"https://www.{site}/"))
        records.append(txn_record(
            vid, f"https://www.{site}/",
            content_type="text/html",
            set_cookie=f"_ga{n}={value}; Domain={site}; Path=/; {PERSIST}",
        ))
        records.append(txn_record(
            vid, f"https://{host}/ea/collect",
            cookie_header=f"_ga{n}={value}",
        ))
        expected["cookie-header"].add((site, f"_ga{n}"))
        n += 1
    # 3 PostBody leaks: JS-set cookie exfiltrated in a JSON POST
    for i in range(3):
        site, host = add_site(n)
        vid = f"lv{n}"
        value = f"fb.1.postleak{n:04d}"
        records.append(visit_record(vid, f"https://www.{site}/"))
        records.append(js_cookie_record(
            vid, f"_fbp{n}={value}; domain=.{site}; path=/; {PERSIST}",
            ["https://connect.social-widgets.com/sdk.js", f"https://www.{site}/"],
        ))
        records.append(txn_record(
            vid, f"https://www.{site}/page",
            cookie_header=f"_fbp{n}={value}",
        ))
        records.append(txn_record(
            vid, f"https://{host}/ea/sync",
            method="POST",
            post_body=json.dumps({"cookies": {f"_fbp{n}": value}}),
            post_content_type="application/json",
            initiators=[f"https://{host}/ea/script.js"],
        ))
        expected["post-body"].add((site, f"_fbp{n}"))
        n += 1
    # 3 UrlParam leaks (one percent-encoded)
    for i in range(3):
        site, host = add_site(n)
        vid = f"lv{n}"
        value = f"vid.urlleak{n:05d}" if i != 2 else f"vid urlleak{n:05d}"
        records.append(visit_record(vid, f"https://www.{site}/"))
        records.append(txn_record(
            vid, f"https://www.{site}/",
            content_type="text/html",
            set_cookie=f"visitor{n}={value}; Domain={site}; {PERSIST}",
        ))
        records.append(txn_record(
            vid, f"https://www.{site}/p2",
            cookie_header=f"visitor{n}={value}",
        ))
        from urllib.parse import quote

        records.append(txn_record(
            vid, f"https://{host}/ea/view?visitor_id={quote(value)}",
        ))
        expected["url-param"].add((site, f"visitor{n}"))
        n += 1

    # decoys --------------------------------------------------------------
    # 1-2: short values
    for i in range(2):
        site, host = add_site(n)
        vid = f"lv{n}"
        records.append(visit_record(vid, f"https://www.{site}/"))
        records.append(txn_record(
            vid, f"https://www.{site}/", content_type="text/html",
            set_cookie=f"short{n}=yes{i}; Domain={site}; {PERSIST}",
        ))
        records.append(txn_record(
            vid, f"https://{host}/ea/collect", cookie_header=f"short{n}=yes{i}",
        ))
        n += 1
    # 3-4: session cookies (no expiry)
    for i in range(2):
        site, host = add_site(n)
        vid = f"lv{n}"
        value = f"sessionvalue{n:05d}"
        records.append(visit_record(vid, f"https://www.{site}/"))
        records.append(txn_record(
            vid, f"https://www.{site}/", content_type="text/html",
            set_cookie=f"sid{n}={value}; Domain={site}; Path=/",
        ))
        records.append(txn_record(
            vid, f"https://{host}/ea/collect", cookie_header=f"sid{n}={value}",
        ))
        n += 1
    # 5-6: multi-site value (same value on two sites)
    shared = "sharedconsentvalue01"
    for i in range(2):
        site, host = add_site(n)
        vid = f"lv{n}"
        records.append(visit_record(vid, f"https://www.{site}/"))
        records.append(txn_record(
            vid, f"https://www.{site}/", content_type="text/html",
            set_cookie=f"consent={shared}; Domain={site}; {PERSIST}",
        ))
        records.append(txn_record(
            vid, f"https://{host}/ea/collect", cookie_header=f"consent={shared}",
        ))
        n += 1
    # 7-8: tracker-set cookies (self-leaks are excluded by definition)
    for i in range(2):
        site, host = add_site(n)
        vid = f"lv{n}"
        value = f"etuidselfvalue{n:04d}"
        records.append(visit_record(vid, f"https://www.{site}/"))
        if i == 0:
            records.append(txn_record(
                vid, f"https://{host}/ea/collect",
                set_cookie=f"etuid={value}; Domain={site}; {PERSIST}",
            ))
            records.append(txn_record(
                vid, f"https://{host}/ea/view", cookie_header=f"etuid={value}",
            ))
        else:
            records.append(js_cookie_record(
                vid, f"etjs={value}; domain=.{site}; path=/; {PERSIST}",
                [f"https://{host}/ea/tag.js", f"https://www.{site}/"],
            ))
            records.append(txn_record(
                vid, f"https://{host}/ea/view", cookie_header=f"etjs={value}",
            ))
        n += 1
    return records, dlines, expected
