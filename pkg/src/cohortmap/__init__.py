"""Building-age cohort mapping engine.

Fuses construction-year evidence from census grids, map-service tags, and
monument registries into a geocoded dataset, assigns spatial CV folds, runs
confidence-gated address inference against a pluggable classifier, and emits
planner-facing reports.
"""

__version__ = "0.1.0"
