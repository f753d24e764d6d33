"""Year annotation for monument descriptions.

The annotator is an interface: the deterministic rule-based default delegates
to the temporal normalizer and never fabricates a year; the remote variant
posts to a text-generation endpoint speaking a fixed JSON contract
(request ``{"text": ..., "cohorts": [...]}``, response
``{"construction_year": <int|null>}``).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Protocol

import requests

from ..normalize import normalize_temporal
from ..records import COHORT_LABELS, plausible_year_window
from ..net import http_timeout
from .scraper import MonumentEntry

__all__ = [
    "Annotator",
    "AnnotatorResponse",
    "AnnotatorUnavailable",
    "ContractViolation",
    "RuleBasedAnnotator",
    "RemoteAnnotator",
    "annotate_year",
    "REMOTE_PROMPT_TEMPLATE",
]

log = logging.getLogger(__name__)

# Reference instruction template a remote endpoint may apply server-side.
# The wire contract itself carries only the text and the cohort labels.
REMOTE_PROMPT_TEMPLATE = (
    "Extract the construction year of the building described below. "
    "Reply with a JSON object with a single field construction_year, "
    "an integer year or null if the text states none. "
    "The known age cohorts are: {cohorts}.\n\nText: {text}"
)


class AnnotatorUnavailable(RuntimeError):
    """Annotator endpoint unreachable or refusing service."""


class ContractViolation(ValueError):
    """Annotator reply does not match the JSON contract."""


@dataclass(frozen=True)
class AnnotatorResponse:
    construction_year: int | None


class Annotator(Protocol):
    def annotate(self, text: str, cohorts: list[str]) -> object:
        """Return the raw (JSON-shaped) annotation for a piece of text."""


class RuleBasedAnnotator:
    """Deterministic default: an explicit year from the grammar, or null."""

    def annotate(self, text: str, cohorts: list[str]) -> object:
        result = normalize_temporal(text)
        return {"construction_year": result.year}


class RemoteAnnotator:
    """HTTP annotator speaking the JSON contract."""

    def __init__(self, endpoint: str, timeout: float | None = None) -> None:
        self.endpoint = endpoint
        self.timeout = timeout if timeout is not None else http_timeout()

    def annotate(self, text: str, cohorts: list[str]) -> object:
        try:
            resp = requests.post(
                self.endpoint,
                json={"text": text, "cohorts": cohorts},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise AnnotatorUnavailable(f"annotator request failed: {exc}") from exc
        if resp.status_code != 200:
            raise AnnotatorUnavailable(f"annotator returned HTTP {resp.status_code}")
        try:
            return resp.json()
        except ValueError as exc:
            raise ContractViolation(f"annotator reply is not JSON: {exc}") from exc


def annotate_year(entry: MonumentEntry, annotator: Annotator) -> AnnotatorResponse:
    """Annotate one monument entry and validate the reply against the contract.

    Years outside the plausibility window are coerced to null with a warning.
    """
    text = entry.description_text or entry.address_text
    raw = annotator.annotate(text, list(COHORT_LABELS))
    if not isinstance(raw, dict) or set(raw.keys()) != {"construction_year"}:
        raise ContractViolation(f"expected exactly {{'construction_year': ...}}, got {raw!r}")
    year = raw["construction_year"]
    if year is not None and (isinstance(year, bool) or not isinstance(year, int)):
        raise ContractViolation(f"construction_year must be int or null, got {year!r}")
    if year is not None:
        lo, hi = plausible_year_window()
        if not lo <= year <= hi:
            log.warning("annotator year %s outside [%s, %s]; coercing to null", year, lo, hi)
            year = None
    return AnnotatorResponse(construction_year=year)
