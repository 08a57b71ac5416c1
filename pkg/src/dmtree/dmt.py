"""Diversified multiple trees: k C4.5 trees on mutually disjoint attribute
sets, combined by simple or leaf-weighted vote."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dmtree.dataset import Dataset, DatasetError, conform
from dmtree.serialize import header_lines, parse_header, split_tree_sections
from dmtree.tree import DecisionTree, TreeParams, encode_row, fit_tree, parse_tree_lines, tree_body_lines, used_attributes
from dmtree.voting import VoteBreakdown, argmax_with_ties, breakdown, tie_break_rank

SCHEMES = ("simple", "laplace", "support")
# tree counts used in the robustness study and in the voting-scheme study
SIZE_PRESETS = (3, 7, 13, 21)
ALT_SIZE_PRESETS = (3, 5, 11, 21)


def laplace_weight(class_counts, c: int) -> float:
    """``(tp + 1) / (tp + fp + c)`` where ``tp`` is the weight of the leaf's
    largest class and ``fp`` the rest."""
    counts = np.asarray(class_counts, dtype=np.float64)
    tp = float(counts.max()) if counts.size else 0.0
    fp = float(counts.sum()) - tp
    return (tp + 1.0) / (tp + fp + c)


def support_weight(class_counts, n: int, literal: bool = False) -> float:
    """Fraction of the ``n`` training rows that reached the leaf.

    With ``literal=True`` the misclassified mass ``fp / n`` is returned
    instead, for comparison with that reading of the weighting.
    """
    if n < 1:
        raise ValueError("training size must be >= 1")
    counts = np.asarray(class_counts, dtype=np.float64)
    total = float(counts.sum())
    if literal:
        return (total - (float(counts.max()) if counts.size else 0.0)) / n
    return total / n


def _leaf_weights(scheme: str, labels: np.ndarray, counts: np.ndarray, n_classes: int, n: int, literal: bool) -> np.ndarray:
    if scheme == "simple":
        return np.ones(labels.shape[0])
    tp = counts[np.arange(labels.shape[0]), labels]
    total = counts.sum(axis=1)
    if scheme == "laplace":
        return (tp + 1.0) / (total + n_classes)
    if literal:
        return (total - tp) / n
    return total / n


@dataclass(eq=False)
class DmtModel:
    trees: list[DecisionTree]
    scheme: str = "simple"
    class_priors: dict[str, float] | None = None
    training_size: int = 0
    support_literal: bool = False

    def __post_init__(self):
        if not self.trees:
            raise ValueError("a DMT model needs at least one tree")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown voting scheme {self.scheme!r}; choose from {SCHEMES}")
        if self.class_priors is None:
            t = self.trees[0]
            self.class_priors = dict(zip(t.classes, t.priors))

    @property
    def k(self) -> int:
        return len(self.trees)

    @property
    def schema(self):
        return self.trees[0].schema

    @property
    def classes(self) -> tuple[str, ...]:
        return self.trees[0].classes

    @property
    def rank(self) -> np.ndarray:
        return tie_break_rank(self.classes, [self.class_priors[c] for c in self.classes])

    def with_scheme(self, scheme: str) -> "DmtModel":
        """Same trees, different vote weighting."""
        return DmtModel(self.trees, scheme, self.class_priors, self.training_size, self.support_literal)

    def member_votes(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per-tree predicted class indices and vote weights, ``(k, n)`` each."""
        labels, weights = [], []
        for t in self.trees:
            lab, counts = t.predict_counts(X)
            labels.append(lab)
            weights.append(_leaf_weights(self.scheme, lab, counts, len(self.classes), self.training_size, self.support_literal))
        return np.array(labels), np.array(weights)

    def vote_matrix(self, X: np.ndarray) -> np.ndarray:
        labels, weights = self.member_votes(X)
        out = np.zeros((X.shape[0], len(self.classes)))
        for lab, w in zip(labels, weights):
            np.add.at(out, (np.arange(X.shape[0]), lab), w)
        return out

    def predict(self, X: np.ndarray) -> np.ndarray:
        return argmax_with_ties(self.vote_matrix(X), self.rank)

    def predict_dataset(self, d: Dataset) -> np.ndarray:
        return self.predict(conform(d, self.schema))

    def to_text(self) -> str:
        lines = header_lines(
            self.schema,
            self.classes,
            [self.class_priors[c] for c in self.classes],
            kind="dmt",
            scheme=self.scheme,
            support_literal=self.support_literal,
            training_size=self.training_size,
            members=self.k,
        )
        for t in self.trees:
            lines.extend(tree_body_lines(t))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "DmtModel":
        header, body = parse_header(text.splitlines())
        if header.get("kind") != "dmt":
            raise ValueError("not a DMT model file")
        trees = [
            parse_tree_lines(sec, header["schema"], header["classes"], header["priors"])
            for sec in split_tree_sections(body)
        ]
        if len(trees) != header["members"]:
            raise ValueError(f"header declares {header['members']} trees, found {len(trees)}")
        return cls(
            trees,
            header["scheme"],
            dict(zip(header["classes"], header["priors"])),
            header["training_size"],
            header["support_literal"],
        )


def build_dmt(d: Dataset, k: int, params: TreeParams | None = None, scheme: str = "simple", support_literal: bool = False) -> DmtModel:
    """Build ``k`` trees, each on the attributes no earlier tree used.

    A tree that uses no attribute removes nothing, so every later tree is
    the same majority stump; the loop still runs to ``k``.
    """
    if int(k) < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if d.n_rows == 0:
        raise DatasetError("cannot build a DMT model on an empty dataset")
    if len(d.classes) < 2:
        raise DatasetError("DMT training data needs at least two classes")
    candidates = set(d.names)
    trees = []
    for _ in range(int(k)):
        tree = fit_tree(d, params, candidates)
        trees.append(tree)
        candidates -= used_attributes(tree)
    return DmtModel(trees, scheme, d.class_priors(), d.n_rows, support_literal)


def classify_dmt(m: DmtModel, row) -> VoteBreakdown:
    x = encode_row(m.schema, row)[None, :]
    labels, weights = m.member_votes(x)
    return breakdown(m.classes, m.rank, [m.classes[i] for i in labels[:, 0]], weights[:, 0])


def tree_sizes(m: DmtModel) -> list[int]:
    return [t.size for t in m.trees]
