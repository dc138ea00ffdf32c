import os

import numpy as np
import pytest

from qrshrink.data import Dataset


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture
def toy_data(rng):
    X = rng.standard_normal((40, 3))
    y = X @ np.array([1.0, -0.5, 0.8]) + rng.standard_normal(40)
    return Dataset(X, y)


def la_csv_path():
    """The LA pollution-mortality CSV, if the user supplied it."""
    for cand in (os.environ.get("QRSHRINK_LA_CSV", ""),
                 os.path.join(os.path.dirname(__file__), "..", "data",
                              "la_pollution.csv")):
        if cand and os.path.exists(cand):
            return cand
    return None
