"""Free-form country names from model output -> ISO 3166-1 alpha-2."""

from __future__ import annotations

from functools import lru_cache

import pycountry

from webmeasure.model import INTERNATIONAL

_INTERNATIONAL_WORDS = {"international", "global", "worldwide", "world"}

# Names models commonly emit that pycountry's lookup does not resolve.
_ALIASES = {
    "uk": "GB",
    "u.k.": "GB",
    "britain": "GB",
    "great britain": "GB",
    "england": "GB",
    "scotland": "GB",
    "wales": "GB",
    "northern ireland": "GB",
    "united kingdom of great britain": "GB",
    "u.s.": "US",
    "u.s.a.": "US",
    "america": "US",
    "united states of america": "US",
    "the united states": "US",
    "russia": "RU",
    "turkey": "TR",
    "republic of korea": "KR",
    "korea": "KR",
    "north korea": "KP",
    "ivory coast": "CI",
    "holland": "NL",
    "the netherlands": "NL",
    "kosovo": "XK",
    "macedonia": "MK",
    "czechia": "CZ",
    "swaziland": "SZ",
    "burma": "MM",
    "cape verde": "CV",
    "vatican": "VA",
    "vatican city": "VA",
    "palestine": "PS",
    "hong kong": "HK",
    "macau": "MO",
    "uae": "AE",
    "the uae": "AE",
    "emirates": "AE",
    "south africa": "ZA",
    "the philippines": "PH",
    "democratic republic of the congo": "CD",
    "dr congo": "CD",
    "republic of the congo": "CG",
}


@lru_cache(maxsize=None)
def country_codes() -> tuple[str, ...]:
    return tuple(sorted({c.alpha_2 for c in pycountry.countries} | {"XK"}))


@lru_cache(maxsize=4096)
def canonical_country(name: str) -> str | None:
    """Alpha-2 code (or "international") for a country name or code; None if unknown."""
    if not isinstance(name, str):
        return None
    text = " ".join(name.strip().split())
    if not text:
        return None
    low = text.lower()
    if low in _INTERNATIONAL_WORDS:
        return INTERNATIONAL
    if low in _ALIASES:
        return _ALIASES[low]
    if len(text) == 2 and text.isalpha():
        code = text.upper()
        return code if code in country_codes() else None
    try:
        return pycountry.countries.lookup(text).alpha_2
    except LookupError:
        pass
    if low.startswith("the "):
        return canonical_country(text[4:])
    return None


def country_name(code: str) -> str:
    if code == INTERNATIONAL:
        return INTERNATIONAL
    c = pycountry.countries.get(alpha_2=code)
    return c.name if c else code
