"""Seeded synthetic data generators.

``make_ozone_like`` produces a table with the ozone schema (same columns,
same invariants, plausible ranges and correlations, a seasonal cycle and a
truncation pile-up in the inversion base height).  It exists so the
experiment pipeline can run end to end in environments where the genuine
measurements are not available; it is NOT the real data set and carries no
claim of scientific validity.

``make_linear_gaussian`` is the plain benchmark generator used by the test
suite: standard normal predictors, a known sparse coefficient vector and
Gaussian noise.
"""

from __future__ import annotations

import numpy as np

from .data import Dataset


def make_linear_gaussian(n: int, p: int, active: int, seed: int,
                         noise_sd: float = 0.5, coef_scale: float = 1.0,
                         response_name: str = "y"):
    """Sparse linear-Gaussian benchmark data.

    Returns (dataset, coefs, intercept, noise_sd); the first ``active``
    predictors carry decaying nonzero coefficients, the rest are noise.
    """
    if not 0 <= active <= p:
        raise ValueError("active must lie in [0, p]")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    coefs = np.zeros(p)
    coefs[:active] = coef_scale * (1.0 / np.sqrt(1.0 + np.arange(active)))
    intercept = 0.5
    y = intercept + X @ coefs + noise_sd * rng.standard_normal(n)
    cols = {f"x{j + 1}": X[:, j] for j in range(p)}
    cols[response_name] = y
    return Dataset.from_columns(cols), coefs, intercept, noise_sd


def make_ozone_like(n: int = 330, seed: int = 0) -> Dataset:
    """A synthetic stand-in with the ozone table's schema and invariants."""
    rng = np.random.default_rng(seed)
    day = np.sort(rng.choice(np.arange(1, 367), size=n, replace=False))
    season = np.sin(2.0 * np.pi * (day - 105.0) / 366.0)

    sbtp = np.clip(55 + 20 * season + rng.normal(0, 8, n), 20, 100)
    vdht = np.clip(5750 + 120 * season + rng.normal(0, 60, n), 5300, 5950)
    ibht = np.clip(2400 - 950 * season + rng.normal(0, 1300, n), 111, 5000)
    ibtp = np.clip(120 + 2.2 * (sbtp - 55) - 0.012 * (ibht - 2300)
                   + rng.normal(0, 15, n), -25, 332)
    hmdt = np.clip(58 + 10 * season + rng.normal(0, 15, n), 19, 93)
    dgpg = np.clip(15 + 25 * season + rng.normal(0, 30, n), -69, 107)
    wdsp = np.clip(rng.normal(5, 2.2, n), 0, 21)
    vsty = np.round(np.clip(120 - 60 * season + rng.normal(0, 55, n), 0, 350) / 10) * 10

    log_ozone = (
        2.02
        + 0.35 * season
        + 0.022 * (sbtp - 55)
        - 0.00012 * (ibht - 2300)
        + 0.18 * (ibht >= 5000)
        + 0.004 * (hmdt - 58)
        - 0.0012 * (vsty - 120)
        + 0.002 * (dgpg - 15)
        + rng.normal(0, 0.33, n)
    )
    upo3 = np.maximum(1, np.round(np.exp(log_ozone)))

    return Dataset.from_columns({
        "upo3": upo3, "vdht": vdht, "wdsp": wdsp, "hmdt": hmdt, "sbtp": sbtp,
        "ibht": ibht, "dgpg": dgpg, "ibtp": ibtp, "vsty": vsty,
        "day": day.astype(float),
    })


def write_csv(data: Dataset, path) -> None:
    """Write a dataset as a plain comma-separated file with a header row."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(data.columns) + "\n")
        for pos in range(data.n_rows):
            cells = []
            for j, col in enumerate(data.columns):
                v = data.values[pos, j]
                cells.append(f"{int(v)}" if v == int(v) else f"{v:.6g}")
            fh.write(",".join(cells) + "\n")
