"""C4.5-style decision trees.

Splits are chosen by gain ratio with C4.5's average-gain guard. Continuous
attributes get binary ``<= threshold`` tests at midpoints between adjacent
distinct values, and their gain is charged ``log2(distinct - 1) / known``
for the threshold search. Categorical attributes split multiway, one branch
per declared category. Missing values (and categories never seen in
training) follow the branch that received the most training weight. After
growth the tree is pruned bottom-up with C4.5's pessimistic error estimate.

Everything in this module is deterministic; randomized variants (random
forests, random trees) plug in through :class:`SplitSelector`.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Mapping, Sequence

import numpy as np

from dmtree.dataset import CATEGORICAL, MISSING, AttributeSchema, Dataset, DatasetError
from dmtree.voting import argmax_with_ties, tie_break_rank

CONTINUOUS_TEST = "continuous-threshold"
CATEGORICAL_TEST = "categorical-multiway"

# gains below this are treated as zero (float noise on exactly-zero gains)
GAIN_EPS = 1e-9


@dataclass(frozen=True)
class SplitTest:
    attribute: str
    form: str = CONTINUOUS_TEST
    threshold: float | None = None

    def __post_init__(self):
        if self.form == CONTINUOUS_TEST:
            if self.threshold is None or not math.isfinite(self.threshold):
                raise ValueError("continuous tests need a finite threshold")
        elif self.form == CATEGORICAL_TEST:
            if self.threshold is not None:
                raise ValueError("categorical tests carry no threshold")
        else:
            raise ValueError(f"unknown test form {self.form!r}")


@dataclass(frozen=True)
class TreeParams:
    """C4.5 hyperparameters.

    ``pruning_confidence=1.0`` disables pruning.
    """

    min_leaf_instances: int = 2
    pruning_confidence: float = 0.25
    instance_weights: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if int(self.min_leaf_instances) < 1:
            raise ValueError("min_leaf_instances must be >= 1")
        if not 0.0 < self.pruning_confidence <= 1.0:
            raise ValueError("pruning_confidence must be in (0, 1]")
        if self.instance_weights is not None:
            w = np.asarray(self.instance_weights, dtype=np.float64)
            if np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ValueError("instance weights must be finite and nonnegative")
            object.__setattr__(self, "instance_weights", w)

    @property
    def prunes(self) -> bool:
        return self.pruning_confidence < 1.0


@dataclass(eq=False)
class Node:
    counts: np.ndarray
    label: int
    test: SplitTest | None = None
    column: int = -1
    children: list["Node"] = field(default_factory=list)
    majority_branch: int = 0

    @property
    def is_leaf(self) -> bool:
        return self.test is None

    @property
    def size(self) -> int:
        return 1 + sum(ch.size for ch in self.children)

    def make_leaf(self) -> None:
        self.test = None
        self.column = -1
        self.children = []
        self.majority_branch = 0


@dataclass(eq=False)
class DecisionTree:
    """A trained tree plus the training schema, class list and priors it
    needs to route rows and break ties."""

    root: Node
    schema: tuple[AttributeSchema, ...]
    classes: tuple[str, ...]
    priors: tuple[float, ...]

    @property
    def size(self) -> int:
        """Total node count (internal nodes plus leaves)."""
        return self.root.size

    @property
    def rank(self) -> np.ndarray:
        return tie_break_rank(self.classes, self.priors)

    def leaves(self) -> list[Node]:
        out = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                out.append(node)
            else:
                stack.extend(reversed(node.children))
        return out

    def apply(self, X: np.ndarray) -> list[Node]:
        """Leaf reached by every row of an encoded matrix (columns in
        ``self.schema`` order)."""
        X = np.asarray(X, dtype=np.float64)
        result: list[Node | None] = [None] * X.shape[0]
        stack = [(self.root, np.arange(X.shape[0]))]
        while stack:
            node, rows = stack.pop()
            if rows.size == 0:
                continue
            if node.is_leaf:
                for r in rows.tolist():
                    result[r] = node
                continue
            branch = _branch_of(node, X[rows, node.column])
            for b, child in enumerate(node.children):
                stack.append((child, rows[branch == b]))
        return result

    def predict_counts(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``(class index, leaf class counts)`` for each row."""
        leaves = self.apply(X)
        counts = np.array([leaf.counts for leaf in leaves]).reshape(len(leaves), len(self.classes))
        labels = np.array([leaf.label for leaf in leaves], dtype=np.intp)
        return labels, counts

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.predict_counts(X)[0]

    def predict_dataset(self, d: Dataset) -> np.ndarray:
        from dmtree.dataset import conform

        return self.predict(conform(d, self.schema))

    def to_text(self) -> str:
        return tree_to_text(self)

    def __eq__(self, other):
        if not isinstance(other, DecisionTree):
            return NotImplemented
        return self.to_text() == other.to_text()

    __hash__ = None


def _branch_of(node: Node, values: np.ndarray) -> np.ndarray:
    missing = np.isnan(values)
    if node.test.form == CONTINUOUS_TEST:
        branch = np.where(values <= node.test.threshold, 0, 1)
    else:
        codes = np.where(missing, -1, values).astype(np.intp)
        bad = (codes < 0) | (codes >= len(node.children))
        branch = np.where(bad, node.majority_branch, codes)
    return np.where(missing, node.majority_branch, branch)


# information measures


def entropy(class_weights) -> float:
    """Entropy in bits of a vector of nonnegative class weights."""
    w = np.asarray(class_weights, dtype=np.float64)
    if np.any(w < 0):
        raise ValueError("class weights must be nonnegative")
    total = w.sum()
    if not total > 0:
        raise ValueError("entropy needs at least one positive weight")
    p = w / total
    p = p[p > 0]  # drops weights that underflow to 0 after division
    return float(max(0.0, -(p * np.log2(p)).sum()))


def _entropy_rows(counts: np.ndarray) -> np.ndarray:
    """Entropy along the last axis; zero-weight rows give 0."""
    total = counts.sum(axis=-1)
    safe = np.where(total > 0, total, 1.0)
    h = _plogp(safe) / safe - _plogp(counts).sum(axis=-1) / safe
    return np.maximum(h, 0.0)


def _plogp(x) -> np.ndarray:
    """Elementwise ``x * log2(x)`` with ``0 log 0 = 0``."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    np.log2(x, out=out, where=x > 0)
    out *= x
    return out


def _partition_gain(parts: np.ndarray, missing_weight: float) -> tuple[float, float]:
    """Gain and split information of a partition.

    ``parts`` is a ``(branches, classes)`` weight matrix over rows with a
    known value; the missing weight reduces the gain proportionally and
    counts as an extra part of the split information.
    """
    known = parts.sum()
    total = known + missing_weight
    if known <= 0:
        return 0.0, 0.0
    branch_w = parts.sum(axis=1)
    info = float((branch_w * _entropy_rows(parts)).sum() / known)
    gain = (known / total) * (float(_entropy_rows(parts.sum(axis=0))) - info)
    sizes = np.append(branch_w, missing_weight) / total
    split_info = float(-_plogp(sizes).sum())
    return gain, split_info


# split evaluation


@dataclass
class _Candidate:
    column: int
    gain: float
    split_info: float
    threshold: float | None = None

    @property
    def ratio(self) -> float:
        return self.gain / self.split_info


class _NodeData:
    """Rows reaching a node, with views used by split evaluation."""

    def __init__(self, X, y, w, n_classes, rows):
        self.rows = rows
        self.X = X
        self.y = y[rows]
        self.w = w[rows]
        self.n_classes = n_classes
        self.total = float(self.w.sum())


def _continuous_scan(node: _NodeData, columns: np.ndarray, min_leaf: float, full: bool = False) -> dict:
    """Score every threshold of every continuous column at once.

    Arrays shaped ``(n - 1, m)`` are indexed by cut position in each
    column's sorted order. ``full=True`` adds the penalized gain and split
    information of every cut; otherwise only what is needed to find each
    column's best cut is computed.
    """
    V = node.X[np.ix_(node.rows, columns)]
    n, m = V.shape
    order = np.argsort(V, axis=0, kind="stable")
    Vs = np.take_along_axis(V, order, axis=0)
    known = ~np.isnan(Vs)
    ys = node.y[order]
    ws = np.where(known, node.w[order], 0.0)

    c = node.n_classes
    cum = np.empty((n, m, c))
    for k in range(c):
        np.cumsum(np.where(ys == k, ws, 0.0), axis=0, out=cum[:, :, k])
    tot = cum[-1]
    left = cum[:-1]
    right = tot[None, :, :] - left
    wk = tot.sum(axis=-1)
    wl = left.sum(axis=-1)
    wr = wk[None, :] - wl

    boundary = Vs[:-1] < Vs[1:]
    label_change = ys[:-1] != ys[1:]
    # a cut is only worth trying where the class distribution changes:
    # skip it when both adjacent value groups hold a single, shared class
    if np.all(boundary | ~known[1:]):
        span_change = label_change
    else:
        idx = np.broadcast_to(np.arange(n)[:, None], (n, m))
        differs = ~(Vs[:-1] == Vs[1:])
        is_start = np.vstack([np.ones((1, m), bool), differs])
        is_end = np.vstack([differs, np.ones((1, m), bool)])
        starts = np.maximum.accumulate(np.where(is_start, idx, 0), axis=0)
        ends = np.minimum.accumulate(np.where(is_end, idx, n - 1)[::-1], axis=0)[::-1]
        changes = np.vstack([np.zeros((1, m), np.intp), np.cumsum(label_change, axis=0)])
        span_change = (
            np.take_along_axis(changes, ends[1:], axis=0) - np.take_along_axis(changes, starts[:-1], axis=0)
        ) > 0
    valid = boundary & span_change & (wl >= min_leaf) & (wr >= min_leaf)

    safe_wk = np.where(wk > 0, wk, 1.0)
    # wl * H(left) + wr * H(right), via sum_k x_k log x_k identities
    weighted_info = _plogp(wl) + _plogp(wr) - _plogp(left).sum(axis=-1) - _plogp(right).sum(axis=-1)
    h_known = (_plogp(wk) - _plogp(tot).sum(axis=-1)) / safe_wk
    gain_known = h_known[None, :] - weighted_info / safe_wk

    distinct = 1 + boundary.sum(axis=0)
    penalty = np.log2(np.maximum(distinct - 1, 1)) / safe_wk
    out = {
        "Vs": Vs, "valid": valid, "gain_known": gain_known, "wl": wl, "wr": wr,
        "wk": wk, "penalty": penalty,
    }
    if full:
        out["gain"] = _penalized_gain(node.total, wk[None, :], gain_known, penalty[None, :])
        out["split_info"] = _split_info(node.total, wl, wr, wk[None, :])
        out["thresholds"] = _midpoints(Vs[:-1], Vs[1:])
    return out


def _penalized_gain(total, wk, gain_known, penalty):
    return (wk / total) * gain_known - penalty


def _split_info(total, wl, wr, wk):
    return -(_plogp(wl / total) + _plogp(wr / total) + _plogp((total - wk) / total))


def _midpoints(lo, hi):
    with np.errstate(invalid="ignore"):
        mid = (lo + hi) / 2.0
        return np.where(mid < hi, mid, lo)


@dataclass
class _Scores:
    """Candidate tests at a node, one per attribute, in column order."""

    columns: np.ndarray
    gain: np.ndarray
    split_info: np.ndarray
    threshold: np.ndarray

    def pick(self, i: int) -> _Candidate:
        thr = self.threshold[i]
        return _Candidate(int(self.columns[i]), float(self.gain[i]), float(self.split_info[i]), None if np.isnan(thr) else float(thr))


def _continuous_scores(node: _NodeData, columns: np.ndarray, min_leaf: float) -> _Scores:
    """Best threshold per continuous column (by gain), penalized."""
    if columns.size == 0 or node.rows.size < 2:
        return _Scores(np.empty(0, np.intp), np.empty(0), np.empty(0), np.empty(0))
    s = _continuous_scan(node, columns, min_leaf)
    valid = s["valid"]
    best = np.argmax(np.where(valid, s["gain_known"], -np.inf), axis=0)
    cols = np.arange(columns.size)
    keep = valid[best, cols]
    best, cols = best[keep], cols[keep]
    wl = s["wl"][best, cols]
    wr = s["wr"][best, cols]
    wk = s["wk"][cols]
    gain = _penalized_gain(node.total, wk, s["gain_known"][best, cols], s["penalty"][cols])
    split_info = _split_info(node.total, wl, wr, wk)
    thr = _midpoints(s["Vs"][best, cols], s["Vs"][best + 1, cols])
    return _Scores(columns[cols], gain, split_info, thr)


def _categorical_parts(node: _NodeData, column: int, n_categories: int):
    values = node.X[node.rows, column]
    known = ~np.isnan(values) & (values >= 0)
    codes = np.where(known, values, 0).astype(np.intp)
    parts = np.zeros((n_categories, node.n_classes))
    np.add.at(parts, (codes[known], node.y[known]), node.w[known])
    return parts, float(node.w[~known].sum())


def _categorical_candidate(node: _NodeData, column: int, n_categories: int, min_leaf: float) -> _Candidate | None:
    parts, missing = _categorical_parts(node, column, n_categories)
    if np.count_nonzero(parts.sum(axis=1) >= min_leaf) < 2:
        return None
    gain, split_info = _partition_gain(parts, missing)
    return _Candidate(column, gain, split_info)


def _categorical_scores(node: _NodeData, columns: np.ndarray, schema, min_leaf: float) -> _Scores:
    """Multiway-split gain and split information of every categorical
    column at once, from a ``(columns, categories, classes)`` weight array."""
    n_cols = columns.size
    n_cat = max(len(schema[c].categories) for c in columns.tolist())
    c = node.n_classes
    V = node.X[np.ix_(node.rows, columns)]
    known = ~np.isnan(V) & (V >= 0)
    codes = np.where(known, V, 0).astype(np.intp)
    flat = (np.arange(n_cols)[None, :] * n_cat + codes) * c + node.y[:, None]
    w = np.broadcast_to(node.w[:, None], V.shape)
    parts = np.bincount(flat[known], weights=w[known], minlength=n_cols * n_cat * c).reshape(n_cols, n_cat, c)
    missing = np.where(known, 0.0, w).sum(axis=0)

    branch_w = parts.sum(axis=2)
    known_w = branch_w.sum(axis=1)
    total = known_w + missing
    safe_known = np.where(known_w > 0, known_w, 1.0)
    info = (branch_w * _entropy_rows(parts)).sum(axis=1) / safe_known
    gain = np.where(known_w > 0, (known_w / total) * (_entropy_rows(parts.sum(axis=1)) - info), 0.0)
    sizes = np.concatenate([branch_w, missing[:, None]], axis=1) / total[:, None]
    split_info = np.where(known_w > 0, -_plogp(sizes).sum(axis=1), 0.0)
    ok = np.count_nonzero(branch_w >= min_leaf, axis=1) >= 2
    return _Scores(columns[ok], gain[ok], split_info[ok], np.full(int(ok.sum()), np.nan))


def _evaluate(node: _NodeData, columns: np.ndarray, schema, min_leaf: float) -> _Scores:
    is_cat = np.array([schema[c].kind == CATEGORICAL for c in columns.tolist()], dtype=bool)
    scores = _continuous_scores(node, columns[~is_cat], min_leaf)
    if not is_cat.any():
        return scores
    extra = _categorical_scores(node, columns[is_cat], schema, min_leaf)
    cols = np.concatenate([scores.columns, extra.columns]).astype(np.intp)
    order = np.argsort(cols, kind="stable")
    return _Scores(
        cols[order],
        np.concatenate([scores.gain, extra.gain])[order],
        np.concatenate([scores.split_info, extra.split_info])[order],
        np.concatenate([scores.threshold, extra.threshold])[order],
    )


def _select_c45(scores: _Scores) -> _Candidate | None:
    """Highest gain ratio among candidates whose gain reaches the average
    gain of all positive-gain candidates; ties go to the lowest column."""
    possible = (scores.gain > GAIN_EPS) & (scores.split_info > 0)
    if not possible.any():
        return None
    avg = scores.gain[possible].mean()
    eligible = possible & (scores.gain >= avg - 1e-12)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(eligible, scores.gain / np.where(eligible, scores.split_info, 1.0), -np.inf)
    return scores.pick(int(np.argmax(ratio)))


# split selection strategies


class SplitSelector:
    """Chooses the test at a node; the default is deterministic C4.5."""

    def choose(self, node: _NodeData, columns: np.ndarray, schema, min_leaf: float) -> _Candidate | None:
        return _select_c45(_evaluate(node, columns, schema, min_leaf))


class RandomSubsetSelector(SplitSelector):
    """Random-forest selection: C4.5 choice among ``subset_size`` attributes
    drawn without replacement. If that draw has no positive-gain test, the
    next ``subset_size`` attributes of the same random permutation are tried,
    until a split is found or the candidates are exhausted."""

    def __init__(self, subset_size: int, rng: np.random.Generator):
        self.subset_size = max(1, int(subset_size))
        self.rng = rng

    def choose(self, node, columns, schema, min_leaf):
        perm = self.rng.permutation(columns)
        for start in range(0, perm.size, self.subset_size):
            chunk = np.sort(perm[start:start + self.subset_size])
            best = _select_c45(_evaluate(node, chunk, schema, min_leaf))
            if best is not None:
                return best
        return None


def ranked_tests(node: _NodeData, columns: np.ndarray, schema, min_leaf: float) -> list[_Candidate]:
    """Every positive-gain test at a node (each threshold of a continuous
    attribute is its own test), sorted by decreasing gain ratio. Ties keep
    column order, then threshold order."""
    out: list[tuple[float, int, int, _Candidate]] = []
    cont = np.array([c for c in columns.tolist() if schema[c].kind != CATEGORICAL], dtype=np.intp)
    if cont.size and node.rows.size >= 2:
        s = _continuous_scan(node, cont, min_leaf, full=True)
        gain, split_info = s["gain"], s["split_info"]
        ok = s["valid"] & (gain > GAIN_EPS) & (split_info > 0)
        for i, j in zip(*np.nonzero(ok)):
            cand = _Candidate(int(cont[j]), float(gain[i, j]), float(split_info[i, j]), float(s["thresholds"][i, j]))
            out.append((-cand.ratio, cand.column, int(i), cand))
    for col in columns.tolist():
        attr = schema[col]
        if attr.kind == CATEGORICAL:
            cand = _categorical_candidate(node, col, len(attr.categories), min_leaf)
            if cand is not None and cand.gain > GAIN_EPS and cand.split_info > 0:
                out.append((-cand.ratio, cand.column, 0, cand))
    out.sort(key=lambda t: t[:3])
    return [t[3] for t in out]


class TopKPoolSelector(SplitSelector):
    """Random-trees selection: uniform choice among the ``pool`` best tests
    by gain ratio."""

    def __init__(self, pool: int, rng: np.random.Generator):
        self.pool = max(1, int(pool))
        self.rng = rng

    def choose(self, node, columns, schema, min_leaf):
        ranked = ranked_tests(node, columns, schema, min_leaf)
        if not ranked:
            return None
        top = ranked[: self.pool]
        return top[int(self.rng.integers(len(top)))]


# growth and pruning


def _candidate_test(schema, cand: _Candidate) -> SplitTest:
    attr = schema[cand.column]
    if attr.kind == CATEGORICAL:
        return SplitTest(attr.name, CATEGORICAL_TEST)
    return SplitTest(attr.name, CONTINUOUS_TEST, cand.threshold)


class _Grower:
    def __init__(self, X, y, w, schema, n_classes, rank, params: TreeParams, selector: SplitSelector):
        self.X = X
        self.y = y
        self.w = w
        self.schema = schema
        self.n_classes = n_classes
        self.rank = rank
        self.min_leaf = float(params.min_leaf_instances)
        self.selector = selector

    def leaf(self, counts) -> Node:
        return Node(counts=counts, label=int(argmax_with_ties(counts, self.rank)))

    def grow(self, rows: np.ndarray, columns: np.ndarray) -> Node:
        node_data = _NodeData(self.X, self.y, self.w, self.n_classes, rows)
        counts = np.bincount(node_data.y, weights=node_data.w, minlength=self.n_classes).astype(np.float64)
        node = self.leaf(counts)
        total = counts.sum()
        if (
            columns.size == 0
            or np.count_nonzero(counts > 0) <= 1
            or total < 2 * self.min_leaf
        ):
            return node
        cand = self.selector.choose(node_data, columns, self.schema, self.min_leaf)
        if cand is None:
            return node
        test = _candidate_test(self.schema, cand)
        values = self.X[rows, cand.column]
        known = ~np.isnan(values) & ~((values < 0) & (test.form == CATEGORICAL_TEST))
        if test.form == CONTINUOUS_TEST:
            n_branches = 2
            branch = np.where(values <= test.threshold, 0, 1)
        else:
            n_branches = len(self.schema[cand.column].categories)
            branch = np.where(known, values, 0).astype(np.intp)
        branch_w = np.bincount(branch[known], weights=node_data.w[known], minlength=n_branches)
        majority = int(np.argmax(branch_w))
        branch = np.where(known, branch, majority)

        child_columns = columns
        if test.form == CATEGORICAL_TEST:
            child_columns = columns[columns != cand.column]
        node.test = test
        node.column = cand.column
        node.majority_branch = majority
        node.children = [self.grow(rows[branch == b], child_columns) for b in range(n_branches)]
        return node


def added_errors(n: float, e: float, confidence: float) -> float:
    """C4.5's extra pessimistic errors for a leaf holding ``n`` cases of
    which ``e`` are misclassified (upper confidence bound minus ``e``)."""
    if n <= 0:
        return 0.0
    if e < 1e-6:
        return n * (1.0 - math.exp(math.log(confidence) / n))
    if e < 0.9999:
        v = n * (1.0 - math.exp(math.log(confidence) / n))
        return v + e * (added_errors(n, 1.0, confidence) - v)
    if e + 0.5 >= n:
        return 0.67 * (n - e)
    z2 = NormalDist().inv_cdf(1.0 - confidence) ** 2
    pr = (e + 0.5 + z2 / 2 + math.sqrt(z2 * ((e + 0.5) * (1 - (e + 0.5) / n) + z2 / 4))) / (n + z2)
    return n * pr - e


def _leaf_error(node: Node, confidence: float) -> float:
    n = float(node.counts.sum())
    e = n - float(node.counts.max()) if n > 0 else 0.0
    return e + added_errors(n, e, confidence)


def prune(node: Node, confidence: float) -> float:
    """Collapse subtrees whose pessimistic error as a leaf is no worse;
    returns the node's estimated error after pruning."""
    as_leaf = _leaf_error(node, confidence)
    if node.is_leaf:
        return as_leaf
    subtree = sum(prune(ch, confidence) for ch in node.children)
    if as_leaf <= subtree + 1e-9:
        node.make_leaf()
        return as_leaf
    return subtree


def _resolve_columns(schema, candidate_attrs) -> np.ndarray:
    if candidate_attrs is None:
        return np.arange(len(schema), dtype=np.intp)
    positions = {a.name: j for j, a in enumerate(schema)}
    unknown = [a for a in candidate_attrs if a not in positions]
    if unknown:
        raise DatasetError(f"candidate attribute {sorted(unknown)[0]!r} is not in the schema")
    return np.array(sorted(positions[a] for a in candidate_attrs), dtype=np.intp)


def fit_tree(
    d: Dataset,
    params: TreeParams | None = None,
    candidate_attrs=None,
    *,
    classes: Sequence[str] | None = None,
    priors: Sequence[float] | None = None,
    rows: np.ndarray | None = None,
    selector: SplitSelector | None = None,
) -> DecisionTree:
    """Tree builder with the knobs the ensembles need.

    ``classes``/``priors`` let an ensemble member trained on a resample keep
    the full training set's class list and tie-break order; ``rows``
    restricts training to a subset of rows (weights still come from
    ``params.instance_weights``, indexed like ``d``).
    """
    params = params or TreeParams()
    if d.n_rows == 0:
        raise DatasetError("cannot build a tree on an empty dataset")
    classes = tuple(d.classes if classes is None else classes)
    if priors is None:
        pri = d.class_priors()
        priors = tuple(pri.get(c, 0.0) for c in classes)
    priors = tuple(float(p) for p in priors)
    y = d.class_codes(classes)
    if params.instance_weights is None:
        w = np.ones(d.n_rows)
    else:
        w = params.instance_weights
        if w.shape != (d.n_rows,):
            raise ValueError(f"{w.shape[0]} instance weights for {d.n_rows} rows")
    rows = np.arange(d.n_rows) if rows is None else np.asarray(rows, dtype=np.intp)
    if rows.size == 0:
        raise DatasetError("cannot build a tree on an empty dataset")
    columns = _resolve_columns(d.schema, candidate_attrs)
    rank = tie_break_rank(classes, priors)
    grower = _Grower(d.X, y, w, d.schema, len(classes), rank, params, selector or SplitSelector())
    root = grower.grow(rows, columns)
    if params.prunes:
        prune(root, params.pruning_confidence)
    return DecisionTree(root, d.schema, classes, priors)


def build_tree(d: Dataset, params: TreeParams | None = None, candidate_attrs=None) -> DecisionTree:
    """Grow and prune a C4.5 tree on ``d`` using only ``candidate_attrs``
    (all attributes when ``None``)."""
    return fit_tree(d, params, candidate_attrs)


def gain_ratio(d: Dataset, weights, test: SplitTest) -> float | None:
    """Gain ratio of ``test`` on ``d``; ``None`` when the test leaves fewer
    than two non-empty parts. Continuous tests are charged the threshold
    search cost before the ratio is taken."""
    w = np.ones(d.n_rows) if weights is None else np.asarray(weights, dtype=np.float64)
    col = d.index_of(test.attribute)
    attr = d.schema[col]
    classes = d.classes
    y = d.class_codes(classes)
    values = d.X[:, col]
    known = ~np.isnan(values) & (values >= 0 if attr.kind == CATEGORICAL else True)
    missing = float(w[~known].sum())
    if test.form == CATEGORICAL_TEST:
        if attr.kind != CATEGORICAL:
            raise DatasetError(f"attribute {attr.name!r} is not categorical")
        parts = np.zeros((len(attr.categories), len(classes)))
        np.add.at(parts, (values[known].astype(np.intp), y[known]), w[known])
        penalty = 0.0
    else:
        if attr.kind == CATEGORICAL:
            raise DatasetError(f"attribute {attr.name!r} is not continuous")
        parts = np.zeros((2, len(classes)))
        side = (values[known] > test.threshold).astype(np.intp)
        np.add.at(parts, (side, y[known]), w[known])
        pos = w > 0
        distinct = np.unique(values[known & pos]).size
        known_w = float(w[known].sum())
        penalty = math.log2(distinct - 1) / known_w if distinct > 1 else 0.0
    if np.count_nonzero(parts.sum(axis=1) > 0) < 2:
        return None
    gain, split_info = _partition_gain(parts, missing)
    return (gain - penalty) / split_info


def best_split(d: Dataset, weights, candidate_attrs, params: TreeParams | None = None) -> SplitTest | None:
    params = params or TreeParams()
    w = np.ones(d.n_rows) if weights is None else np.asarray(weights, dtype=np.float64)
    columns = _resolve_columns(d.schema, candidate_attrs)
    classes = d.classes
    node = _NodeData(d.X, d.class_codes(classes), w, len(classes), np.arange(d.n_rows))
    cand = SplitSelector().choose(node, columns, d.schema, float(params.min_leaf_instances))
    return None if cand is None else _candidate_test(d.schema, cand)


def encode_row(schema: Sequence[AttributeSchema], row) -> np.ndarray:
    """Encode a row given either as a name-to-value mapping or as a sequence
    already in schema order (raw values or encoded floats)."""
    if isinstance(row, Mapping):
        missing = [a.name for a in schema if a.name not in row]
        if missing:
            raise DatasetError(f"row lacks attribute {missing[0]!r}")
        values = [row[a.name] for a in schema]
    else:
        values = list(np.asarray(row, dtype=object).ravel())
        if len(values) != len(schema):
            raise DatasetError(f"row has {len(values)} values, schema has {len(schema)} attributes")
    out = np.empty(len(schema))
    for j, (attr, v) in enumerate(zip(schema, values)):
        if v is None or (isinstance(v, str) and v == MISSING):
            out[j] = np.nan
        elif attr.kind == CATEGORICAL:
            if isinstance(v, str):
                out[j] = attr.categories.index(v) if v in attr.categories else -1.0
            else:
                out[j] = float(v)
        else:
            if isinstance(v, str):
                raise DatasetError(f"attribute {attr.name!r} expects a number, got {v!r}")
            out[j] = float(v)
    return out


def classify(t: DecisionTree, row) -> tuple[str, np.ndarray]:
    """Label and class counts of the leaf ``row`` reaches."""
    x = encode_row(t.schema, row)
    leaf = t.apply(x[None, :])[0]
    return t.classes[leaf.label], leaf.counts.copy()


def used_attributes(t: DecisionTree) -> set[str]:
    out = set()
    stack = [t.root]
    while stack:
        node = stack.pop()
        if not node.is_leaf:
            out.add(node.test.attribute)
            stack.extend(node.children)
    return out


# text form


def _fmt_counts(counts) -> str:
    return ",".join(repr(float(c)) for c in counts)


def _node_lines(node: Node, schema, classes, depth: int, branch: str, out: list[str]) -> None:
    pad = "  " * depth
    counts = _fmt_counts(node.counts)
    if node.is_leaf:
        out.append(f"{pad}{branch} leaf class={json.dumps(classes[node.label])} counts={counts}")
        return
    attr = json.dumps(node.test.attribute)
    if node.test.form == CONTINUOUS_TEST:
        out.append(
            f"{pad}{branch} split attr={attr} threshold={node.test.threshold!r} "
            f"majority={node.majority_branch} counts={counts}"
        )
        tags = ["<=", ">"]
    else:
        out.append(f"{pad}{branch} split attr={attr} categorical majority={node.majority_branch} counts={counts}")
        tags = ["=" + json.dumps(cat) for cat in schema[node.column].categories]
    for tag, child in zip(tags, node.children):
        _node_lines(child, schema, classes, depth + 1, tag, out)


def tree_body_lines(t: DecisionTree) -> list[str]:
    out: list[str] = [f"tree nodes={t.size}"]
    _node_lines(t.root, t.schema, t.classes, 0, "root", out)
    return out


def tree_to_text(t: DecisionTree) -> str:
    from dmtree.serialize import header_lines

    return "\n".join(header_lines(t.schema, t.classes, t.priors, kind="tree") + tree_body_lines(t)) + "\n"


_LINE = re.compile(r"^(?P<pad> *)(?P<branch>\S+) (?P<kind>leaf|split) (?P<rest>.*)$")


def _decode_json_prefix(text: str):
    value, end = json.JSONDecoder().raw_decode(text)
    return value, text[end:]


def parse_tree_lines(lines: Sequence[str], schema, classes, priors) -> DecisionTree:
    """Inverse of :func:`tree_body_lines`."""
    if not lines or not lines[0].startswith("tree nodes="):
        raise ValueError("tree section must start with 'tree nodes=<n>'")
    expected = int(lines[0].split("=", 1)[1])
    positions = {a.name: j for j, a in enumerate(schema)}
    class_index = {c: i for i, c in enumerate(classes)}
    stack: list[tuple[int, Node]] = []
    root = None
    for raw in lines[1:]:
        m = _LINE.match(raw)
        if not m:
            raise ValueError(f"cannot parse tree line {raw!r}")
        depth = len(m["pad"]) // 2
        rest = m["rest"]
        if m["kind"] == "leaf":
            label, rest = _decode_json_prefix(rest[len("class="):])
            counts = np.array([float(x) for x in rest.strip()[len("counts="):].split(",")])
            node = Node(counts=counts, label=class_index[label])
        else:
            name, rest = _decode_json_prefix(rest[len("attr="):])
            fields = dict(tok.split("=", 1) if "=" in tok else (tok, "") for tok in rest.split())
            counts = np.array([float(x) for x in fields["counts"].split(",")])
            col = positions[name]
            if "threshold" in fields:
                test = SplitTest(name, CONTINUOUS_TEST, float(fields["threshold"]))
            else:
                test = SplitTest(name, CATEGORICAL_TEST)
            node = Node(
                counts=counts,
                label=int(argmax_with_ties(counts, tie_break_rank(classes, priors))),
                test=test,
                column=col,
                majority_branch=int(fields["majority"]),
            )
        while stack and stack[-1][0] >= depth:
            stack.pop()
        if stack:
            stack[-1][1].children.append(node)
        elif root is None:
            root = node
        else:
            raise ValueError("tree text has more than one root")
        stack.append((depth, node))
    if root is None:
        raise ValueError("empty tree section")
    tree = DecisionTree(root, tuple(schema), tuple(classes), tuple(priors))
    if tree.size != expected:
        raise ValueError(f"tree declares {expected} nodes but has {tree.size}")
    return tree


def tree_from_text(text: str) -> DecisionTree:
    from dmtree.serialize import parse_header

    header, body = parse_header(text.splitlines())
    return parse_tree_lines(body, header["schema"], header["classes"], header["priors"])

