"""Wilcoxon signed-rank test and accuracy."""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Sequence

import numpy as np

from dmtree.dataset import Dataset, DatasetError

EXACT_LIMIT = 25
# differences are compared after rounding to this many decimals, so that
# float noise in accuracy arithmetic neither hides zeros nor splits ties
DIFF_DECIMALS = 12


@dataclass(frozen=True)
class PairedAccuracies:
    labels: tuple[str, str]
    pairs: list[tuple[float, float]]

    def __post_init__(self):
        if len(self.labels) != 2:
            raise ValueError("exactly two method labels are required")
        if not self.pairs:
            raise ValueError("at least one accuracy pair is required")
        for a, b in self.pairs:
            if not (0.0 <= a <= 1.0 and 0.0 <= b <= 1.0):
                raise ValueError(f"accuracies must lie in [0, 1], got ({a}, {b})")

    def differences(self) -> np.ndarray:
        return np.array([a - b for a, b in self.pairs], dtype=np.float64)


@dataclass(frozen=True)
class WilcoxonResult:
    n_effective: int
    w_plus: float
    w_minus: float
    p_one_sided: float
    method: str
    zeros_dropped: int = 0

    @property
    def p_rounded(self) -> float:
        return round(self.p_one_sided, 3)


def average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks, tied values sharing the mean of their positions."""
    order = np.argsort(values, kind="stable")
    sorted_vals = values[order]
    ranks = np.empty(values.size)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _exact_lower_tail(ranks: np.ndarray, w_minus: float) -> float:
    """P(W- <= w_minus) when every rank is negative with probability 1/2.

    Ranks are multiples of 1/2, so doubled ranks are integers and the null
    distribution is a subset-sum count over all 2^n sign patterns.
    """
    doubled = [int(round(2 * r)) for r in ranks]
    total = sum(doubled)
    ways = [0] * (total + 1)
    ways[0] = 1
    for r in doubled:
        for s in range(total, r - 1, -1):
            ways[s] += ways[s - r]
    limit = int(round(2 * w_minus))
    return sum(ways[: limit + 1]) / 2 ** len(doubled)


def _normal_lower_tail(ranks: np.ndarray, abs_diffs: np.ndarray, w_minus: float) -> float:
    n = ranks.size
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(abs_diffs, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(((tie_counts ** 3) - tie_counts).sum()) / 48.0
    z = (w_minus + 0.5 - mean) / math.sqrt(var)
    return min(1.0, NormalDist().cdf(z))


def wilcoxon_from_differences(diffs: Sequence[float]) -> WilcoxonResult:
    """One-sided test of "first method more accurate" on paired differences
    ``a - b``: small ``W-`` is evidence for the alternative."""
    d = np.round(np.asarray(diffs, dtype=np.float64), DIFF_DECIMALS)
    nonzero = d[d != 0]
    if nonzero.size == 0:
        raise ValueError("all paired differences are zero; the test is undefined")
    abs_d = np.abs(nonzero)
    ranks = average_ranks(abs_d)
    w_plus = float(ranks[nonzero > 0].sum())
    w_minus = float(ranks[nonzero < 0].sum())
    n = nonzero.size
    if n <= EXACT_LIMIT:
        p, method = _exact_lower_tail(ranks, w_minus), "exact"
    else:
        p, method = _normal_lower_tail(ranks, abs_d, w_minus), "normal-approximation"
    return WilcoxonResult(n, w_plus, w_minus, p, method, int(d.size - n))


def wilcoxon_signed_rank(p: PairedAccuracies) -> WilcoxonResult:
    return wilcoxon_from_differences(p.differences())


def accuracy(model, test: Dataset) -> float:
    """Fraction of ``test`` rows whose predicted label equals the true one.
    ``model`` is anything exposing ``classes`` and ``predict_dataset``."""
    if test.n_rows == 0:
        raise DatasetError("accuracy is undefined on an empty test set")
    pred = model.predict_dataset(test)
    labels = np.asarray(model.classes)[pred]
    return float(np.mean(labels == test.labels))
