"""Seeded synthetic data generators for robustness studies and demos."""

from __future__ import annotations

import numpy as np

from dmtree.dataset import Dataset


def _labels(y: np.ndarray, names=("neg", "pos")) -> np.ndarray:
    return np.where(y == 1, names[1], names[0])


def redundant_groups(
    n_train: int = 400,
    n_test: int = 400,
    groups: int = 10,
    per_group: int = 3,
    shift: float = 2.0,
    jitter: float = 0.3,
    irrelevant: int = 0,
    seed: int = 0,
) -> tuple[Dataset, Dataset]:
    """Binary data whose label is carried redundantly by independent
    attribute groups.

    Each group has a latent value ``shift * (2y - 1) + N(0, 1)`` and
    ``per_group`` attributes that copy it with ``N(0, jitter^2)`` jitter, so
    one group alone predicts the label with accuracy near ``Phi(shift)``
    (about 97.7% at the default). ``irrelevant`` pure-noise attributes are
    appended. Train and test rows are drawn independently.
    """
    rng = np.random.default_rng(seed)

    def draw(n: int) -> Dataset:
        y = rng.integers(0, 2, size=n)
        cols = []
        names = []
        for g in range(groups):
            latent = shift * (2 * y - 1) + rng.standard_normal(n)
            for a in range(per_group):
                cols.append(latent + jitter * rng.standard_normal(n))
                names.append(f"g{g:02d}_{a}")
        for j in range(irrelevant):
            cols.append(rng.standard_normal(n))
            names.append(f"z{j:02d}")
        X = np.column_stack(cols) if cols else np.empty((n, 0))
        return Dataset.from_arrays(X, _labels(y), names)

    return draw(n_train).renamed("groups-train"), draw(n_test).renamed("groups-test")


def microarray_like(
    n: int = 120,
    m: int = 300,
    informative: int = 30,
    minority: float = 0.15,
    effect: float = 1.0,
    seed: int = 0,
    name: str = "",
) -> Dataset:
    """Imbalanced two-class data with few rows and many attributes.

    ``informative`` attributes shift the minority class by ``effect``
    standard deviations (each attribute's sign chosen at random); the rest
    are noise.
    """
    rng = np.random.default_rng(seed)
    y = (rng.random(n) < minority).astype(int)
    if y.sum() < 2:
        y[:2] = 1
    X = rng.standard_normal((n, m))
    signs = rng.choice([-1.0, 1.0], size=informative)
    X[:, :informative] += np.outer(y, signs * effect)
    names = [f"gene{j:04d}" for j in range(m)]
    return Dataset.from_arrays(X, _labels(y, ("normal", "tumor")), names, name=name or f"microarray-{seed}")
