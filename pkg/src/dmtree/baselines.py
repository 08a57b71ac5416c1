"""Comparison ensembles built on the same C4.5 learner: bagging,
AdaBoost.M1, random forests and random trees."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from dmtree import rng as rngs
from dmtree.dataset import Dataset, DatasetError, conform
from dmtree.serialize import header_lines, parse_header, split_tree_sections
from dmtree.tree import (
    DecisionTree,
    RandomSubsetSelector,
    TopKPoolSelector,
    TreeParams,
    encode_row,
    fit_tree,
    parse_tree_lines,
    tree_body_lines,
)
from dmtree.voting import VoteBreakdown, argmax_with_ties, breakdown, tie_break_rank

KINDS = ("bagging", "adaboost", "random_forest", "random_tree")
DEFAULT_MEMBERS = 100
DEFAULT_ROUNDS = 100
# member weight given to an errorless boosting round: ln((1 - e) / e) at e = 1e-10
ERRORLESS_WEIGHT = math.log((1 - 1e-10) / 1e-10)


@dataclass(frozen=True)
class RandomSplitParams:
    forest_subset_size: int | None = None
    top_k_pool: int = 20

    def __post_init__(self):
        if self.forest_subset_size is not None and self.forest_subset_size < 1:
            raise ValueError("forest_subset_size must be >= 1")
        if self.top_k_pool < 1:
            raise ValueError("top_k_pool must be >= 1")

    def subset_size(self, m: int) -> int:
        if self.forest_subset_size is None:
            return int(math.floor(math.log2(m))) + 1 if m > 0 else 1
        if self.forest_subset_size > m:
            raise ValueError(f"forest_subset_size {self.forest_subset_size} exceeds attribute count {m}")
        return self.forest_subset_size


@dataclass(eq=False)
class EnsembleModel:
    members: list[DecisionTree]
    member_weights: list[float]
    kind: str
    rng_seed: int = 0
    class_priors: dict[str, float] | None = None
    trace: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.members:
            raise ValueError("an ensemble needs at least one member")
        if len(self.member_weights) != len(self.members):
            raise ValueError("one weight per member is required")
        if self.kind not in KINDS:
            raise ValueError(f"unknown ensemble kind {self.kind!r}")
        if any(w < 0 or not math.isfinite(w) for w in self.member_weights):
            raise ValueError("member weights must be finite and nonnegative")
        if self.class_priors is None:
            t = self.members[0]
            self.class_priors = dict(zip(t.classes, t.priors))

    @property
    def aggregation(self) -> str:
        return "weighted" if self.kind == "adaboost" else "majority"

    @property
    def schema(self):
        return self.members[0].schema

    @property
    def classes(self) -> tuple[str, ...]:
        return self.members[0].classes

    @property
    def rank(self) -> np.ndarray:
        return tie_break_rank(self.classes, [self.class_priors[c] for c in self.classes])

    def vote_matrix(self, X: np.ndarray) -> np.ndarray:
        n = X.shape[0]
        out = np.zeros((n, len(self.classes)))
        rows = np.arange(n)
        for t, w in zip(self.members, self.member_weights):
            labels, _ = t.predict_counts(X)
            np.add.at(out, (rows, labels), w)
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
            kind=self.kind,
            aggregation=self.aggregation,
            seed=self.rng_seed,
            members=len(self.members),
            weights=[float(w) for w in self.member_weights],
        )
        for t in self.members:
            lines.extend(tree_body_lines(t))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "EnsembleModel":
        header, body = parse_header(text.splitlines())
        trees = [
            parse_tree_lines(sec, header["schema"], header["classes"], header["priors"])
            for sec in split_tree_sections(body)
        ]
        if len(trees) != header["members"]:
            raise ValueError(f"header declares {header['members']} members, found {len(trees)}")
        return cls(trees, header["weights"], header["kind"], header["seed"], dict(zip(header["classes"], header["priors"])))


def _check(d: Dataset, count: int, what: str) -> None:
    if int(count) < 1:
        raise ValueError(f"{what} must be >= 1, got {count}")
    if d.n_rows == 0:
        raise DatasetError("cannot train an ensemble on an empty dataset")


def _bootstrap_weights(rng: np.random.Generator, n: int, base=None) -> np.ndarray:
    """Multiplicity of each row in an n-row sample drawn with replacement.

    Training on multiplicities is equivalent to training on the duplicated
    rows for a weight-aware learner.
    """
    counts = np.bincount(rng.integers(0, n, size=n), minlength=n).astype(np.float64)
    return counts if base is None else counts * base


def _member(d, params, classes, priors, weights, selector=None) -> DecisionTree:
    rows = np.flatnonzero(weights > 0)
    p = TreeParams(params.min_leaf_instances, params.pruning_confidence, weights)
    return fit_tree(d, p, classes=classes, priors=priors, rows=rows, selector=selector)


def _class_info(d: Dataset):
    classes = d.classes
    pri = d.class_priors()
    return classes, tuple(pri[c] for c in classes)


def build_bagging(d: Dataset, members: int = DEFAULT_MEMBERS, params: TreeParams | None = None, seed: int = 0) -> EnsembleModel:
    _check(d, members, "members")
    params = params or TreeParams()
    classes, priors = _class_info(d)
    trees = []
    for i in range(int(members)):
        weights = _bootstrap_weights(rngs.stream(seed, rngs.MEMBER, i), d.n_rows)
        trees.append(_member(d, params, classes, priors, weights))
    return EnsembleModel(trees, [1.0] * len(trees), "bagging", seed, dict(zip(classes, priors)))


def build_adaboost(d: Dataset, rounds: int = DEFAULT_ROUNDS, params: TreeParams | None = None, seed: int = 0) -> EnsembleModel:
    """AdaBoost.M1 by reweighting.

    Row weights start uniform and are kept normalized to 1; the base learner
    sees them rescaled to sum to ``n`` so its minimum-leaf rule keeps its
    meaning. Boosting stops early when a round's weighted error reaches 0.5
    (that round is discarded unless it is the first) or 0 (that round is kept
    with a large capped weight).
    """
    _check(d, rounds, "rounds")
    params = params or TreeParams()
    classes, priors = _class_info(d)
    y = d.class_codes(classes)
    n = d.n_rows
    w = np.full(n, 1.0 / n)
    trees, alphas, errors, sums = [], [], [], []
    for _ in range(int(rounds)):
        tree = _member(d, params, classes, priors, w * n)
        pred, _ = tree.predict_counts(d.X)
        wrong = pred != y
        err = float(w[wrong].sum())
        errors.append(err)
        if err >= 0.5:
            if not trees:
                trees.append(tree)
                alphas.append(1.0)
            break
        if err <= 0.0:
            trees.append(tree)
            alphas.append(ERRORLESS_WEIGHT)
            break
        beta = err / (1.0 - err)
        trees.append(tree)
        alphas.append(math.log(1.0 / beta))
        w = np.where(wrong, w, w * beta)
        w = w / w.sum()
        sums.append(float(w.sum()))
    trace = {"errors": errors, "weight_sums": sums}
    return EnsembleModel(trees, alphas, "adaboost", seed, dict(zip(classes, priors)), trace)


def build_random_forest(
    d: Dataset,
    members: int = DEFAULT_MEMBERS,
    rsp: RandomSplitParams | None = None,
    params: TreeParams | None = None,
    seed: int = 0,
) -> EnsembleModel:
    """Bootstrap members whose nodes choose among a random attribute subset.
    Members default to unpruned trees with single-instance leaves."""
    _check(d, members, "members")
    rsp = rsp or RandomSplitParams()
    params = params or TreeParams(min_leaf_instances=1, pruning_confidence=1.0)
    size = rsp.subset_size(d.n_attributes)
    classes, priors = _class_info(d)
    trees = []
    for i in range(int(members)):
        r = rngs.stream(seed, rngs.MEMBER, i)
        weights = _bootstrap_weights(r, d.n_rows)
        trees.append(_member(d, params, classes, priors, weights, RandomSubsetSelector(size, r)))
    return EnsembleModel(trees, [1.0] * len(trees), "random_forest", seed, dict(zip(classes, priors)))


def build_random_tree_ensemble(
    d: Dataset,
    members: int = DEFAULT_MEMBERS,
    rsp: RandomSplitParams | None = None,
    params: TreeParams | None = None,
    seed: int = 0,
) -> EnsembleModel:
    """Members trained on the full data; each node picks uniformly among the
    ``top_k_pool`` best tests, where every threshold of a continuous
    attribute counts as a separate test."""
    _check(d, members, "members")
    rsp = rsp or RandomSplitParams()
    params = params or TreeParams()
    classes, priors = _class_info(d)
    trees = []
    for i in range(int(members)):
        selector = TopKPoolSelector(rsp.top_k_pool, rngs.stream(seed, rngs.MEMBER, i))
        trees.append(fit_tree(d, params, classes=classes, priors=priors, selector=selector))
    return EnsembleModel(trees, [1.0] * len(trees), "random_tree", seed, dict(zip(classes, priors)))


def classify_ensemble(e: EnsembleModel, row) -> VoteBreakdown:
    x = encode_row(e.schema, row)[None, :]
    labels = [e.classes[t.predict_counts(x)[0][0]] for t in e.members]
    return breakdown(e.classes, e.rank, labels, e.member_weights)
