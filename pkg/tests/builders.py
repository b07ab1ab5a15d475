"""Synthetic inputs shared by several test modules."""

from __future__ import annotations

import random

from webmeasure.listsrc import DEFAULT_CCTLD_COUNTRIES, TrancoEntry

RARE_COUNTRIES = ("AR", "MX", "EG", "NG", "KE", "TH", "MY", "PH", "PK", "BD", "UA", "GR", "PT", "CZ", "HU", "RO", "NZ", "IL")


def synthetic_tranco(n: int, tlds=("com", "net", "org", "io", "gov", "mil", "gov.uk", "de", "it", "co.uk"), seed: int = 1):
    rng = random.Random(seed)
    out = []
    for rank in range(1, n + 1):
        tld = tlds[rng.randrange(len(tlds))]
        out.append(TrancoEntry(rank, f"site{rank}.{tld}"))
    return out


def country_replica(per_cc_pool: int = 120, seed: int = 3):
    """Tranco + manual labels shaped so that 20 ccTLDs x 100 + 500 generic -> 2,466 records in 22 classes.

    Generic labels: 221 international, 120 US, 125 spread over the ccTLD
    countries (so those classes grow past 100), and 34 spread over 18
    countries with fewer than 10 sites each, which the min_class filter drops.
    """
    rng = random.Random(seed)
    entries: list[TrancoEntry] = []
    names: list[str] = []
    for tld in DEFAULT_CCTLD_COUNTRIES:
        for i in range(per_cc_pool):
            names.append(f"cc{i}-{tld.replace('.', '-')}.{tld}")
    generic = [f"gen{i}.{('com', 'net', 'org', 'io')[i % 4]}" for i in range(500)]
    names.extend(generic)
    rng.shuffle(names)
    entries = [TrancoEntry(rank, d) for rank, d in enumerate(names, start=1)]

    cc_codes = list(DEFAULT_CCTLD_COUNTRIES.values())
    labels: list[str] = ["international"] * 221 + ["US"] * 120
    labels += [cc_codes[i % len(cc_codes)] for i in range(125)]
    rare = [RARE_COUNTRIES[i % len(RARE_COUNTRIES)] for i in range(34)]
    labels += rare
    assert len(labels) == 500
    rng.shuffle(labels)
    manual = dict(zip(generic, labels))
    return entries, manual


TRACKER_LIST = {
    "categories": {
        "Advertising": [
            {"Google": {"http://www.google.com/": ["doubleclick.net", "googletagmanager.com", "google-analytics.com"]}},
            {"Yandex": {"http://yandex.com/": ["yandex.ru"], "dnt": "eff"}},
        ],
        "Social": [{"Facebook": {"http://www.facebook.com/": ["facebook.net", "facebook.com"]}}],
        "Analytics": [{"Hotjar": {"https://hotjar.com/": ["hotjar.com"]}}],
    }
}


def _artifact(domain: str, country: str, cookies=(), scripts=(), outcome=None):
    from webmeasure.crawler.types import Cookie, CrawlArtifact, Outcome
    from webmeasure.model import TaskKind, normalize_url

    rec = normalize_url(domain).with_label(TaskKind.COUNTRY, country)
    outcome = outcome or Outcome.SUCCESS
    if outcome is not Outcome.SUCCESS:
        return CrawlArtifact(rec, outcome, reason="planted failure")
    return CrawlArtifact(
        rec,
        outcome,
        final_url=rec.url,
        http_status=200,
        screenshot=b"png",
        html=b"<html></html>",
        cookies=tuple(Cookie(name, dom, 8) for name, dom in cookies),
        body_script_domains=tuple(scripts),
    )


def tracker_corpus():
    """Planted crawl corpus over four countries.

    IT: 120 sites, 30 positives; DE: 100 sites, 7 positives; FR: 99 sites, 50
    positives; AT: 10 sites, 1 positive. Non-positive sites carry decoy cookies
    (first-party, same-site subdomain, third-party non-tracker, look-alike host).
    """
    from webmeasure.crawler.types import Outcome

    out = []
    decoys = [
        [("sid", "{d}")],
        [("pref", "www.{d}")],
        [("cdn", "static.cdnprovider.org")],
        [("x", "notdoubleclick.net")],
        [],
    ]
    third = [("IDE", ".doubleclick.net"), ("_ga", "stats.g.doubleclick.net"), ("fr", ".facebook.com"), ("yuid", "mc.yandex.ru")]
    plan = {"it": ("IT", 120, 30), "de": ("DE", 100, 7), "fr": ("FR", 99, 50), "at": ("AT", 10, 1)}
    for tld, (cc, total, positives) in plan.items():
        for i in range(total):
            d = f"site{i}.{tld}"
            if i < positives:
                cookies = [("own", d), third[i % len(third)]]
            else:
                cookies = [(n, dom.format(d=d)) for n, dom in decoys[i % len(decoys)]]
            out.append(_artifact(d, cc, cookies))
        # Failed visits never count toward totals.
        out.append(_artifact(f"down.{tld}", cc, outcome=Outcome.TIMEOUT))
    # A tracker's own site setting its own cookie is first party.
    out.append(_artifact("facebook.com", "AT", [("c_user", ".facebook.com")]))
    return out


def script_corpus():
    """Ten IT sites with hand-planted body-script domains and two AU sites."""
    it = [
        ["www.google-analytics.com", "www.googletagmanager.com", "ajax.cdnjs.org"],
        ["ssl.google-analytics.com", "www.googletagmanager.com", "www.google-analytics.com"],
        ["google-analytics.com", "googletagmanager.com", "securepubads.g.doubleclick.net"],
        ["www.google-analytics.com", "www.googletagmanager.com", "connect.facebook.net", "facebook.net"],
        ["www.google-analytics.com", "googletagmanager.com", "doubleclick.net", "static.hotjar.com"],
        ["doubleclick.net", "connect.facebook.net", "script.hotjar.com"],
        ["stats.g.doubleclick.net", "connect.facebook.net", "static.hotjar.com", "mc.yandex.ru"],
        ["cdn.jsdelivr.net"],
        ["notgoogletagmanager.com"],
        [],
    ]
    au = [["www.googletagmanager.com"], ["www.googletagmanager.com", "connect.facebook.net"]]
    arts = [_artifact(f"s{i}.it", "IT", scripts=s) for i, s in enumerate(it)]
    arts += [_artifact(f"s{i}.com.au", "AU", scripts=s) for i, s in enumerate(au)]
    return arts


def scope_rows():
    """ScopeRecord rows with hand-chosen minimal percentages per classifier.

    Rows labelled identically by both classifiers count on both sides. Rows
    only one classifier puts in a category land in "Uncategorized" on the
    other side.

                     A                 B
      Business       1500/2000 75.0    1500/2000 75.0
      Shopping        240/300  80.0     240/300  80.0
      Forum/Bulletin  353/500  70.6     378/525  72.0
      Blogs/Wiki      300/500  60.0     518/1000 51.8
      News            170/240  70.83..  150/200  75.0
      Uncategorized   243/525  46.28..   20/40   50.0
    """
    rows = []

    def add(k, minimal, a, b):
        for _ in range(k):
            n = len(rows)
            rows.append({
                "url": f"https://site{n}.example",
                "idp": "Google" if n % 3 else "Facebook",
                "scopes": "openid email" if minimal else "openid email profile user_friends",
                "minimal": minimal,
                "category_a": a,
                "category_b": b,
            })

    for cat, total, minimal in (("Business", 2000, 1500), ("Shopping", 300, 240), ("Forum/Bulletin", 500, 353),
                                ("Blogs/Wiki", 500, 300), ("News", 200, 150)):
        add(minimal, True, cat, cat)
        add(total - minimal, False, cat, cat)
    # Extras seen only by classifier B.
    add(25, True, "Uncategorized", "Forum/Bulletin")
    add(218, True, "Uncategorized", "Blogs/Wiki")
    add(282, False, "Uncategorized", "Blogs/Wiki")
    # Extras seen only by classifier A.
    add(20, True, "News", "Uncategorized")
    add(20, False, "News", "Uncategorized")
    return rows
