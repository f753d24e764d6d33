"""Building-age cohort classifier and its training/ablation harness.

Consumes the mapping pipeline's fused dataset CSV and fold CSV, trains a
five-class satellite-tile classifier (backbone + FPN + CoordConv + SE), and
serves predictions over the line-delimited JSON sidecar protocol.
"""

__version__ = "0.1.0"

COHORT_LABELS = ["pre-1919", "1919-1950", "1951-1978", "1979-2000", "post-2000"]
NUM_CLASSES = 5
