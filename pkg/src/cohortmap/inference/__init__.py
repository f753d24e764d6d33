"""Address-to-cohort inference: parse, geocode, tile fetch, classify, gate.

The classifier is pluggable: a uniform baseline, a hash-keyed stub for
tests, or an external sidecar process speaking a line-delimited JSON
protocol.  Every stage failure becomes a flagged decision with the stage
recorded, never a silent drop.
"""

from ..geocode import (
    AmbiguousOutsideCity,
    FixtureGeocoder,
    Geocoder,
    GeocodeMiss,
    HttpGeocoder,
    geocode,
)
from .backends import (
    BackendUnavailable,
    ClassifierBackend,
    InvalidProbabilityVector,
    SIDECAR_PROTOCOL,
    SidecarBackend,
    StubBackend,
    UniformBackend,
)
from .pipeline import (
    AddressInference,
    Decision,
    FlagRateRow,
    InferencePipeline,
    PredictionResult,
    StageRecord,
    ValidatorConfig,
    flag_rate_report,
    infer_address,
    predict,
    validate_confidence,
)
from .tiles import TileFetcher, fetch_tile_for_point

__all__ = [
    "AddressInference",
    "AmbiguousOutsideCity",
    "BackendUnavailable",
    "ClassifierBackend",
    "Decision",
    "FixtureGeocoder",
    "FlagRateRow",
    "Geocoder",
    "GeocodeMiss",
    "HttpGeocoder",
    "InferencePipeline",
    "InvalidProbabilityVector",
    "PredictionResult",
    "SIDECAR_PROTOCOL",
    "SidecarBackend",
    "StageRecord",
    "StubBackend",
    "TileFetcher",
    "UniformBackend",
    "ValidatorConfig",
    "fetch_tile_for_point",
    "flag_rate_report",
    "geocode",
    "infer_address",
    "predict",
    "validate_confidence",
]
