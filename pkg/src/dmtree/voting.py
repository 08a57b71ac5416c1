"""Vote accumulation shared by every ensemble.

Ties are broken by the training class priors (larger prior first), then by
label. Classes are always held in sorted label order; ``rank`` below is the
position of each class in the tie-break order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def tie_break_rank(classes, priors) -> np.ndarray:
    """Rank of each class in the tie-break order (0 wins ties)."""
    order = sorted(range(len(classes)), key=lambda i: (-priors[i], classes[i]))
    rank = np.empty(len(classes), dtype=np.intp)
    rank[order] = np.arange(len(classes))
    return rank


def argmax_with_ties(weights: np.ndarray, rank: np.ndarray) -> np.ndarray:
    """Row-wise argmax over the last axis, resolving exact ties by ``rank``."""
    weights = np.asarray(weights, dtype=np.float64)
    order = np.argsort(rank)
    reordered = weights[..., order]
    return order[np.argmax(reordered, axis=-1)]


@dataclass(frozen=True)
class VoteBreakdown:
    """Accumulated vote weight per class for one row, the winning label, and
    the ``(predicted label, weight)`` contribution of every member."""

    weights: dict[str, float]
    winner: str
    per_tree: list[tuple[str, float]]


def breakdown(classes, rank, member_labels, member_weights) -> VoteBreakdown:
    totals = np.zeros(len(classes))
    index = {c: i for i, c in enumerate(classes)}
    for label, w in zip(member_labels, member_weights):
        totals[index[label]] += w
    winner = classes[int(argmax_with_ties(totals, rank))]
    return VoteBreakdown(
        weights={c: float(totals[i]) for i, c in enumerate(classes)},
        winner=winner,
        per_tree=[(label, float(w)) for label, w in zip(member_labels, member_weights)],
    )
