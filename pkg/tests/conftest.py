import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # makes `oracles` importable

from modelsynth.data import Dataset, load_ozone_csv

REPO_ROOT = Path(__file__).resolve().parent.parent
DATA_FILE = REPO_ROOT / "data" / "ozone_synthetic.csv"
GENUINE_DATA_FILE = REPO_ROOT / "data" / "ozone.csv"
CONFIG_FILE = REPO_ROOT / "configs" / "ozone.yaml"


@pytest.fixture(scope="session")
def ozone() -> Dataset:
    """The shipped 330-row table (synthetic stand-in with the ozone schema)."""
    return load_ozone_csv(DATA_FILE)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260810)


@pytest.fixture()
def small_linear():
    """20 rows, intercept plus one predictor, known coefficients."""
    g = np.random.default_rng(42)
    x = g.standard_normal(20)
    y = 1.0 + 2.0 * x + 0.3 * g.standard_normal(20)
    return x, y
