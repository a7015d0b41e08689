"""Shared fixtures: seeded random model instances for property tests."""

from __future__ import annotations

import numpy as np
import pytest

from saebench import Dataset, dataset_from_arrays


def random_dataset(
    rng: np.random.Generator,
    m: int | None = None,
    p: int | None = None,
    sigma_u2: float | None = None,
) -> Dataset:
    """A valid model instance: intercept design, positive D, raw weights."""
    if m is None:
        m = int(rng.integers(10, 201))
    if p is None:
        p = int(rng.integers(1, 7))
    if sigma_u2 is None:
        sigma_u2 = float(rng.uniform(0.5, 8.0))
    design = np.empty((m, p))
    design[:, 0] = 1.0
    if p > 1:
        design[:, 1:] = rng.standard_normal((m, p - 1))
    beta = rng.uniform(-2.0, 2.0, p)
    d = rng.uniform(0.5, 10.0, m)
    theta = design @ beta + np.sqrt(sigma_u2) * rng.standard_normal(m)
    y = theta + np.sqrt(d) * rng.standard_normal(m)
    weights = rng.uniform(0.1, 1.0, m)
    return dataset_from_arrays(design, y, d, weights)


@pytest.fixture
def reference_dataset() -> Dataset:
    """The m=3 intercept-only instance with equal weights."""
    return dataset_from_arrays(
        design=np.ones((3, 1)),
        direct_estimates=[0.0, 2.0, 7.0],
        sampling_variances=[1.0, 2.0, 3.0],
        weights=[1.0, 1.0, 1.0],
    )
