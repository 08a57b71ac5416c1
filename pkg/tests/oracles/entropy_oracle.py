"""Brute-force entropy and gain-ratio oracle.

Works on plain Python lists of rows and labels with no numpy and no code
shared with the package, so it can check the learner independently. Run it
directly to print the reference numbers used by the tests::

    python tests/oracles/entropy_oracle.py
"""

from __future__ import annotations

import math
from collections import Counter


def entropy(counts) -> float:
    total = sum(counts)
    out = 0.0
    for c in counts:
        p = c / total
        if p > 0:
            out -= p * math.log2(p)
    return out


def _label_entropy(labels) -> float:
    return entropy(list(Counter(labels).values()))


def partition_gain_ratio(labels, groups) -> tuple[float, float]:
    """(gain, gain ratio) of splitting ``labels`` by the parallel list
    ``groups`` of branch keys."""
    n = len(labels)
    branches: dict = {}
    for lab, g in zip(labels, groups):
        branches.setdefault(g, []).append(lab)
    remainder = sum(len(b) / n * _label_entropy(b) for b in branches.values())
    gain = _label_entropy(labels) - remainder
    split_info = entropy([len(b) for b in branches.values()])
    return gain, (gain / split_info if split_info > 0 else float("nan"))


def categorical_gain_ratio(rows, labels, attr: int) -> tuple[float, float]:
    return partition_gain_ratio(labels, [r[attr] for r in rows])


def threshold_gain_ratios(rows, labels, attr: int) -> list[tuple[float, float, float]]:
    """(threshold, raw gain, gain ratio) for every midpoint between distinct
    sorted values, before any threshold-count penalty."""
    values = sorted({r[attr] for r in rows})
    out = []
    for lo, hi in zip(values, values[1:]):
        t = (lo + hi) / 2
        gain, ratio = partition_gain_ratio(labels, [r[attr] <= t for r in rows])
        out.append((t, gain, ratio))
    return out


def penalized_threshold_ratio(rows, labels, attr: int, threshold: float) -> float:
    """C4.5 ratio for a continuous threshold: the gain is reduced by
    log2(distinct - 1) / n before dividing by the split information."""
    n = len(labels)
    distinct = len({r[attr] for r in rows})
    gain, _ = partition_gain_ratio(labels, [r[attr] <= threshold for r in rows])
    split_info = entropy(list(Counter(r[attr] <= threshold for r in rows).values()))
    return (gain - math.log2(distinct - 1) / n) / split_info


WEATHER_HEADER = ["outlook", "temperature", "humidity", "windy"]
WEATHER_ROWS = [
    ("sunny", "hot", "high", "false", "no"),
    ("sunny", "hot", "high", "true", "no"),
    ("overcast", "hot", "high", "false", "yes"),
    ("rainy", "mild", "high", "false", "yes"),
    ("rainy", "cool", "normal", "false", "yes"),
    ("rainy", "cool", "normal", "true", "no"),
    ("overcast", "cool", "normal", "true", "yes"),
    ("sunny", "mild", "high", "false", "no"),
    ("sunny", "cool", "normal", "false", "yes"),
    ("rainy", "mild", "normal", "false", "yes"),
    ("sunny", "mild", "normal", "true", "yes"),
    ("overcast", "mild", "high", "true", "yes"),
    ("overcast", "hot", "normal", "false", "yes"),
    ("rainy", "mild", "high", "true", "no"),
]

# balanced two-attribute XOR, each pattern repeated twice
XOR_ROWS = [(a, b, "p" if a != b else "n") for a in (0.0, 1.0) for b in (0.0, 1.0) for _ in range(2)]


if __name__ == "__main__":
    print(f"entropy([9, 5]) = {entropy([9, 5]):.6f}")
    rows = [r[:4] for r in WEATHER_ROWS]
    labels = [r[4] for r in WEATHER_ROWS]
    for j, name in enumerate(WEATHER_HEADER):
        gain, ratio = categorical_gain_ratio(rows, labels, j)
        print(f"weather {name}: gain = {gain:.6f}, gain ratio = {ratio:.6f}")
    xr = [r[:2] for r in XOR_ROWS]
    xl = [r[2] for r in XOR_ROWS]
    for j in range(2):
        print(f"xor attribute {j}: thresholds {threshold_gain_ratios(xr, xl, j)}")
