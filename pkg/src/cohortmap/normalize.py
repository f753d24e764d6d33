"""Deterministic parsing of temporal expressions and free-text addresses.

Temporal parsing applies a fixed rule ladder; unknown text yields a no-match
result rather than a guess, so downstream fusion can drop unlabeled records.
The century-phrase and circa-prefix vocabularies ship as a data file and can
be extended without code changes.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .records import AgeCohort, cohort_of, plausible_year_window

__all__ = [
    "TemporalResult",
    "Address",
    "UnparseableAddress",
    "normalize_temporal",
    "parse_address",
    "load_temporal_tables",
]


class UnparseableAddress(ValueError):
    """Input text does not match the recognized address forms."""


@dataclass(frozen=True)
class TemporalResult:
    """Outcome of temporal normalization; no-match carries neither field."""

    year: int | None
    cohort_hint: AgeCohort | None
    rule_id: str

    @property
    def matched(self) -> bool:
        return self.rule_id != "no-match"


@dataclass(frozen=True)
class Address:
    street: str
    house_number: str
    city: str

    def __post_init__(self) -> None:
        if not self.street or not self.city:
            raise ValueError("street and city must be non-empty")
        if not re.fullmatch(r"[0-9]+[a-zA-Z]?(-[0-9]+[a-zA-Z]?)?", self.house_number):
            raise ValueError(f"invalid house number: {self.house_number!r}")


_NO_MATCH = TemporalResult(year=None, cohort_hint=None, rule_id="no-match")

_YEAR = re.compile(r"(\d{4})")
_WHOLE_YEAR = re.compile(r"\d{4}")
_WHOLE_RANGE = re.compile(r"(\d{4})\s*[–—-]\s*(\d{4})")
_WHOLE_DECADE = re.compile(r"(\d{3}0)(?:er(?:\s+jahre)?|s)", re.IGNORECASE)
_DASHES = re.compile(r"[‐‑‒–—-]")
_WS = re.compile(r"\s+")


@lru_cache(maxsize=1)
def load_temporal_tables() -> dict:
    """Parsed vocabulary tables from the shipped data file."""
    path = resources.files("cohortmap").joinpath("data/temporal_tables.json")
    with path.open(encoding="utf-8") as f:
        table = json.load(f)
    # longest phrase first so e.g. a band-qualified phrase wins over a bare one
    table["century_phrases"] = sorted(
        table["century_phrases"], key=lambda e: (-len(e["phrase"]), e["phrase"])
    )
    return table


def _plausible(year: int) -> bool:
    lo, hi = plausible_year_window()
    return lo <= year <= hi


def _result(year: int, rule_id: str) -> TemporalResult:
    return TemporalResult(year=year, cohort_hint=cohort_of(year), rule_id=rule_id)


def _exact_rules(text: str) -> TemporalResult | None:
    """Rules that must consume the whole (stripped) text: year, range, decade."""
    if _WHOLE_YEAR.fullmatch(text):
        year = int(text)
        if _plausible(year):
            return _result(year, "year")
    m = _WHOLE_RANGE.fullmatch(text)
    if m:
        a, b = int(m.group(1)), int(m.group(2))
        if a <= b and _plausible(a) and _plausible(b):
            return _result((a + b) // 2, "range")
    m = _WHOLE_DECADE.fullmatch(text)
    if m:
        year = int(m.group(1)) + 5
        if _plausible(year):
            return _result(year, "decade")
    return None


def _normalize_phrase_text(text: str) -> str:
    return _WS.sub(" ", _DASHES.sub(" ", text.lower())).strip()


def normalize_temporal(text: str) -> TemporalResult:
    """Map a source-native year expression to a year and/or cohort hint.

    Rule order: exact 4-digit year; year range (midpoint, rounded down);
    decade; circa prefix stripped then re-parsed; century-phrase table;
    year/range embedded in free text; otherwise no-match.
    """
    stripped = text.strip()
    if not stripped:
        return _NO_MATCH

    hit = _exact_rules(stripped)
    if hit:
        return hit

    lowered = stripped.lower()
    for prefix in load_temporal_tables()["circa_prefixes"]:
        if lowered.startswith(prefix + " ") or (
            lowered.startswith(prefix) and prefix.endswith(".")
        ):
            remainder = stripped[len(prefix):].strip()
            inner = _exact_rules(remainder)
            if inner:
                return TemporalResult(
                    year=inner.year, cohort_hint=inner.cohort_hint, rule_id="circa"
                )

    normalized = _normalize_phrase_text(stripped)
    for entry in load_temporal_tables()["century_phrases"]:
        if entry["phrase"] in normalized:
            # bands reaching past today (late 21C) clamp into the window
            lo, hi = plausible_year_window()
            mid = min(max((entry["year_start"] + entry["year_end"]) // 2, lo), hi)
            return TemporalResult(
                year=None, cohort_hint=cohort_of(mid), rule_id="century-phrase"
            )

    m = _WHOLE_RANGE.search(stripped)
    if m:
        a, b = int(m.group(1)), int(m.group(2))
        if a <= b and _plausible(a) and _plausible(b):
            return _result((a + b) // 2, "text-range")

    years = [int(y) for y in _YEAR.findall(stripped) if _plausible(int(y))]
    if years:
        # several plausible years in one description: keep the earliest,
        # biased toward original construction over later alterations
        return _result(min(years), "text-year")

    return _NO_MATCH


_ADDRESS = re.compile(
    r"^\s*(?P<street>\S.*?)\s+"
    r"(?P<number>\d{1,4}[a-zA-Z]?(?:-\d{1,4}[a-zA-Z]?)?)"
    r"(?:\s*,\s*|\s+)"
    r"(?:(?P<postcode>\d{5})\s+)?"
    r"(?P<city>\S.*?)\s*$"
)


def parse_address(text: str) -> Address:
    """Extract street, house number, and city.

    Recognizes ``<street> <number>, <city>`` and
    ``<street> <number> [postcode] <city>``; a 5-digit postcode is consumed
    but not stored.
    """
    m = _ADDRESS.match(text)
    if not m:
        raise UnparseableAddress(f"unrecognized address: {text!r}")
    return Address(
        street=m.group("street"), house_number=m.group("number"), city=m.group("city")
    )
