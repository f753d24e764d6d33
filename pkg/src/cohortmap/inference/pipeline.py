"""The address-to-decision pipeline and the confidence gate."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

from ..analytics import EmptyInput, round_share
from ..geocode import Geocoder, geocode
from ..geodesy import BoundingBox, GeoPoint
from ..normalize import parse_address
from ..records import AgeCohort, cohort_from_index
from .backends import ClassifierBackend, InvalidProbabilityVector
from .tiles import TileFetcher, fetch_tile_for_point

__all__ = [
    "PredictionResult",
    "ValidatorConfig",
    "Decision",
    "StageRecord",
    "AddressInference",
    "FlagRateRow",
    "InferencePipeline",
    "predict",
    "validate_confidence",
    "infer_address",
    "flag_rate_report",
    "DEFAULT_TAU",
]

log = logging.getLogger(__name__)

DEFAULT_TAU = 0.65
_SUM_TOLERANCE = 1e-3
STAGES = ("parse", "geocode", "tile", "predict", "validate")


@dataclass(frozen=True)
class PredictionResult:
    """Five-class probability vector in cohort-index order."""

    probs: tuple[float, float, float, float, float]

    def __post_init__(self) -> None:
        if len(self.probs) != 5:
            raise InvalidProbabilityVector(f"need 5 probabilities, got {len(self.probs)}")
        if any(not math.isfinite(p) or p < 0.0 or p > 1.0 for p in self.probs):
            raise InvalidProbabilityVector(f"probabilities out of [0, 1]: {self.probs}")
        if abs(sum(self.probs) - 1.0) > 1e-6:
            raise InvalidProbabilityVector(f"probabilities sum to {sum(self.probs)}")

    @property
    def p_max(self) -> float:
        return max(self.probs)

    @property
    def argmax(self) -> AgeCohort:
        return cohort_from_index(self.probs.index(self.p_max))


@dataclass(frozen=True)
class ValidatorConfig:
    tau: float = DEFAULT_TAU

    def __post_init__(self) -> None:
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must be in (0, 1): {self.tau}")


@dataclass(frozen=True)
class Decision:
    """Accepted cohort or a flag for manual review."""

    accepted: bool
    p_max: float | None
    cohort: AgeCohort | None = None

    def __post_init__(self) -> None:
        if self.accepted and self.cohort is None:
            raise ValueError("accepted decisions carry a cohort")
        if not self.accepted and self.cohort is not None:
            raise ValueError("flagged decisions carry no cohort")


@dataclass(frozen=True)
class StageRecord:
    stage: str
    ok: bool
    detail: str


@dataclass(frozen=True)
class AddressInference:
    """Decision plus the per-stage audit trail for the review file."""

    address_text: str
    decision: Decision
    stages: tuple[StageRecord, ...]
    point: GeoPoint | None = None
    prediction: PredictionResult | None = None

    @property
    def failed_stage(self) -> str | None:
        for record in self.stages:
            if not record.ok:
                return record.stage
        return None


def validate_confidence(pred: PredictionResult, cfg: ValidatorConfig) -> Decision:
    """Accept the argmax cohort when p_max >= tau (boundary accepts)."""
    if pred.p_max >= cfg.tau:
        return Decision(accepted=True, p_max=pred.p_max, cohort=pred.argmax)
    return Decision(accepted=False, p_max=pred.p_max)


def predict(tile: bytes, backend: ClassifierBackend) -> PredictionResult:
    """Run the backend and normalize its reply into a PredictionResult.

    Sums within 1e-3 of 1 are renormalized; anything further off is rejected.
    """
    raw = list(backend.probs_for(tile))
    if len(raw) != 5:
        raise InvalidProbabilityVector(f"backend returned {len(raw)} values")
    if any(not isinstance(p, (int, float)) or not math.isfinite(p) or p < 0.0 for p in raw):
        raise InvalidProbabilityVector(f"bad probability values: {raw}")
    total = sum(raw)
    if abs(total - 1.0) > _SUM_TOLERANCE:
        raise InvalidProbabilityVector(f"probabilities sum to {total}")
    return PredictionResult(probs=tuple(p / total for p in raw))


@dataclass
class InferencePipeline:
    """Composed parse -> geocode -> tile -> predict -> validate chain."""

    geocoder: Geocoder
    tile_fetcher: TileFetcher
    backend: ClassifierBackend
    tau: float = DEFAULT_TAU
    zoom: int = 19
    city_box: BoundingBox | None = None
    stitch: bool = False
    max_workers: int = 4
    _validator: ValidatorConfig = field(init=False)

    def __post_init__(self) -> None:
        self._validator = ValidatorConfig(tau=self.tau)

    def infer(self, text: str) -> AddressInference:
        """Infer one address; every failure mode maps to a flagged decision."""
        stages: list[StageRecord] = []

        def flagged(stage: str, exc: Exception) -> AddressInference:
            stages.append(StageRecord(stage=stage, ok=False, detail=str(exc)))
            log.info("address %r flagged at stage %s: %s", text, stage, exc)
            return AddressInference(
                address_text=text,
                decision=Decision(accepted=False, p_max=None),
                stages=tuple(stages),
            )

        try:
            address = parse_address(text)
            stages.append(StageRecord("parse", True, f"{address.street} {address.house_number}"))
        except Exception as exc:
            return flagged("parse", exc)

        try:
            point = geocode(address, self.geocoder, city_box=self.city_box)
            stages.append(StageRecord("geocode", True, f"({point.lat}, {point.lon})"))
        except Exception as exc:
            return flagged("geocode", exc)

        try:
            tile = fetch_tile_for_point(point, self.zoom, self.tile_fetcher, stitch=self.stitch)
            stages.append(StageRecord("tile", True, f"{len(tile)} bytes at z{self.zoom}"))
        except Exception as exc:
            return flagged("tile", exc)

        try:
            prediction = predict(tile, self.backend)
            stages.append(StageRecord("predict", True, f"p_max={prediction.p_max}"))
        except Exception as exc:
            return flagged("predict", exc)

        decision = validate_confidence(prediction, self._validator)
        stages.append(
            StageRecord(
                "validate",
                decision.accepted,
                "accepted" if decision.accepted else f"p_max {prediction.p_max} < tau {self.tau}",
            )
        )
        return AddressInference(
            address_text=text,
            decision=decision,
            stages=tuple(stages),
            point=point,
            prediction=prediction,
        )

    def infer_many(self, texts: Sequence[str]) -> list[AddressInference]:
        """Bounded-parallel inference; results come back in input order."""
        if not texts:
            return []
        with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
            return list(pool.map(self.infer, texts))


def infer_address(text: str, pipeline: InferencePipeline) -> AddressInference:
    return pipeline.infer(text)


@dataclass(frozen=True)
class FlagRateRow:
    tau: float
    count: int
    share_pct: float


def flag_rate_report(
    predictions: Sequence[PredictionResult], taus: Sequence[float]
) -> list[FlagRateRow]:
    """Per threshold: how many stored predictions fall below it (p_max < tau)."""
    if not predictions:
        raise EmptyInput("no stored predictions")
    n = len(predictions)
    rows = []
    for tau in taus:
        count = sum(1 for p in predictions if p.p_max < tau)
        rows.append(FlagRateRow(tau=tau, count=count, share_pct=round_share(100.0 * count / n)))
    return rows
