from __future__ import annotations

import numpy as np
import pytest

from cohorttrainer.data import generate_synthetic_city, load_fold_csv, load_fused_csv


@pytest.fixture(scope="session")
def synthetic_city(tmp_path_factory):
    out = tmp_path_factory.mktemp("city")
    fused_csv, fold_csv, images_dir = generate_synthetic_city(out, per_cohort=12, seed=3, folds_k=3)
    records = load_fused_csv(fused_csv, images_dir)
    folds = load_fold_csv(fold_csv, records)
    return {
        "fused_csv": fused_csv,
        "fold_csv": fold_csv,
        "images_dir": images_dir,
        "records": records,
        "folds": np.asarray(folds),
    }
