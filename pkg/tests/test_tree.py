import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dmtree.dataset import Dataset, DatasetError, parse_dataset
from dmtree.tree import (
    CATEGORICAL_TEST,
    CONTINUOUS_TEST,
    DecisionTree,
    SplitTest,
    TreeParams,
    added_errors,
    best_split,
    build_tree,
    classify,
    entropy,
    gain_ratio,
    tree_from_text,
    used_attributes,
)
from tests.conftest import random_mixed, separable
from tests.oracles import entropy_oracle as oracle

NO_PRUNE = TreeParams(min_leaf_instances=1, pruning_confidence=1.0)


class TestEntropy:
    def test_even_split(self):
        assert entropy([2, 2]) == 1.0

    def test_pure(self):
        assert entropy([4, 0]) == 0.0

    def test_nine_five(self):
        assert entropy([9, 5]) == pytest.approx(0.9403, abs=1e-4)
        assert entropy([9, 5]) == pytest.approx(oracle.entropy([9, 5]), abs=1e-12)

    def test_all_zero_rejected(self):
        with pytest.raises(ValueError):
            entropy([0, 0])

    @given(st.lists(st.floats(0, 1e6, allow_nan=False), min_size=1, max_size=8).filter(lambda w: sum(w) > 0))
    def test_bounds(self, w):
        h = entropy(w)
        positive = sum(1 for x in w if x > 0)
        assert -1e-12 <= h <= math.log2(positive) + 1e-9 if positive > 1 else abs(h) < 1e-12
        assert h == pytest.approx(oracle.entropy(w), abs=1e-9)


class TestGainRatio:
    def test_pure_halves(self):
        d = parse_dataset("b,y\nx,p\nx,p\nz,q\nz,q\n", "y")
        assert gain_ratio(d, None, SplitTest("b", CATEGORICAL_TEST)) == pytest.approx(1.0)

    def test_constant_attribute_has_no_split(self):
        d = parse_dataset("b,y\nx,p\nx,q\nx,q\n", "y")
        assert gain_ratio(d, None, SplitTest("b", CATEGORICAL_TEST)) is None
        e = Dataset.from_arrays([[1.0], [1.0], [1.0]], ["p", "q", "q"])
        assert gain_ratio(e, None, SplitTest("a0", CONTINUOUS_TEST, 1.0)) is None

    def test_weather_outlook(self, weather):
        g = gain_ratio(weather, None, SplitTest("outlook", CATEGORICAL_TEST))
        assert g == pytest.approx(0.1564, abs=5e-3)

    def test_weather_matches_oracle(self, weather):
        rows = [r[:4] for r in oracle.WEATHER_ROWS]
        labels = [r[4] for r in oracle.WEATHER_ROWS]
        for j, name in enumerate(oracle.WEATHER_HEADER):
            _, expected = oracle.categorical_gain_ratio(rows, labels, j)
            assert gain_ratio(weather, None, SplitTest(name, CATEGORICAL_TEST)) == pytest.approx(expected, abs=1e-12)

    def test_instance_weights_act_like_duplicates(self, weather):
        w = np.arange(1, 15, dtype=float) % 3 + 1
        dup = weather.subset(np.repeat(np.arange(14), w.astype(int)))
        t = SplitTest("humidity", CATEGORICAL_TEST)
        assert gain_ratio(weather, w, t) == pytest.approx(gain_ratio(dup, None, t), abs=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 100_000))
    def test_continuous_matches_penalized_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(4, 25))
        x = np.round(rng.standard_normal(n), 1)
        y = rng.integers(0, 2, n)
        if len(set(x.tolist())) < 2 or len(set(y.tolist())) < 2:
            return
        d = Dataset.from_arrays(x[:, None], np.where(y == 1, "b", "a"))
        rows = [(v,) for v in x.tolist()]
        labels = d.labels.tolist()
        for t, _, _ in oracle.threshold_gain_ratios(rows, labels, 0):
            expected = oracle.penalized_threshold_ratio(rows, labels, 0, t)
            got = gain_ratio(d, None, SplitTest("a0", CONTINUOUS_TEST, t))
            assert got == pytest.approx(expected, abs=1e-9)


class TestBestSplit:
    def test_separating_attribute_among_noise(self):
        d = separable(n=60, m=6, seed=4)
        t = best_split(d, None, d.names)
        assert t.attribute == "a0"

    def test_xor_has_no_split(self, xor):
        # the brute-force oracle confirms every single-attribute gain is 0
        rows = [r[:2] for r in oracle.XOR_ROWS]
        labels = [r[2] for r in oracle.XOR_ROWS]
        for j in range(2):
            assert all(abs(g) < 1e-12 for _, g, _ in oracle.threshold_gain_ratios(rows, labels, j))
        assert best_split(xor, None, xor.names) is None

    def test_xor_with_irrelevant_attribute(self, xor):
        d = Dataset(xor.schema + Dataset.from_arrays(np.ones((8, 1)), xor.labels, ["junk"]).schema,
                    np.column_stack([xor.X, np.ones(8)]), xor.labels)
        assert best_split(d, None, d.names) is None

    def test_unique_midpoint(self):
        d = Dataset.from_arrays([[1.0], [2.0], [3.0], [4.0]], ["A", "A", "B", "B"])
        t = best_split(d, None, ["a0"], TreeParams(min_leaf_instances=1))
        assert t == SplitTest("a0", CONTINUOUS_TEST, 2.5)

    def test_restricted_to_candidates(self):
        d = separable(n=60, m=6, seed=4)
        t = best_split(d, None, ["a1", "a2"])
        assert t is None or t.attribute in {"a1", "a2"}

    def test_unknown_candidate(self):
        d = separable()
        with pytest.raises(DatasetError):
            best_split(d, None, ["nope"])

    def test_gain_guard_excludes_low_gain_high_ratio(self):
        # "weak" isolates two rows, so its ratio beats "strong" while its
        # gain sits below the mean positive gain
        strong = ["a"] * 7 + ["b"] * 3 + ["a"] * 3 + ["b"] * 7
        weak = ["u"] * 2 + ["v"] * 18
        labels = ["p"] * 10 + ["q"] * 10
        rows = list(zip(strong, weak))
        g_s, r_s = oracle.categorical_gain_ratio(rows, labels, 0)
        g_w, r_w = oracle.categorical_gain_ratio(rows, labels, 1)
        assert r_w > r_s and g_w < (g_s + g_w) / 2
        d = Dataset.from_columns({"strong": strong, "weak": weak}, labels)
        assert best_split(d, None, d.names, TreeParams(1)).attribute == "strong"


class TestBuildTree:
    def test_single_class_is_leaf(self):
        d = Dataset.from_arrays(np.random.default_rng(0).standard_normal((10, 3)), ["p"] * 10)
        t = build_tree(d)
        assert t.size == 1
        assert t.classes == ("p",)

    def test_one_split_suffices(self):
        t = build_tree(separable())
        assert t.size == 3
        assert used_attributes(t) == {"a0"}

    def test_xor_is_majority_leaf(self, xor):
        t = build_tree(xor, NO_PRUNE)
        assert t.size == 1
        # balanced priors fall back to label order
        assert classify(t, [0.0, 1.0])[0] == "n"

    def test_empty_dataset(self):
        d = Dataset.from_arrays(np.empty((0, 2)), [])
        with pytest.raises(DatasetError):
            build_tree(d)

    def test_only_candidates_used(self):
        rng = np.random.default_rng(2)
        d = random_mixed(rng, 80, 8)
        t = build_tree(d, NO_PRUNE, ["f001", "f004", "f005"])
        assert used_attributes(t) <= {"f001", "f004", "f005"}

    def test_weather_tree(self, weather):
        t = build_tree(weather, NO_PRUNE)
        assert t.root.test.attribute == "outlook"
        assert all(classify(t, weather.row_values(i))[0] == weather.labels[i] for i in range(14))

    def test_leaf_ties_follow_priors(self):
        # one row of each class in a leaf; "z" is more frequent overall
        d = Dataset.from_arrays([[0.0], [0.0], [1.0], [1.0], [1.0]], ["a", "z", "z", "z", "z"])
        t = build_tree(d, TreeParams(min_leaf_instances=2, pruning_confidence=1.0))
        assert classify(t, [0.0])[0] == "z"

    def test_added_errors_examples(self):
        # textbook upper bounds U_0.25(E, N) for error-free leaves
        assert added_errors(6, 0, 0.25) / 6 == pytest.approx(0.206, abs=5e-4)
        assert added_errors(9, 0, 0.25) / 9 == pytest.approx(0.143, abs=5e-4)
        assert added_errors(1, 0, 0.25) == pytest.approx(0.750)
        # one error in 16 uses the normal approximation, close to the exact 0.157
        assert (1 + added_errors(16, 1, 0.25)) / 16 == pytest.approx(0.157, abs=5e-3)
        # nearly all cases wrong: a flat 0.67 per remaining case
        assert added_errors(2, 1.6, 0.25) == pytest.approx(0.67 * 0.4)
        assert added_errors(0, 0, 0.25) == 0.0
        # upper bound of a binomial interval: grows with errors, shrinks with CF
        assert 0 < added_errors(10, 2, 0.5) < added_errors(10, 2, 0.25) < added_errors(10, 2, 0.1)


class TestClassify:
    def test_leaf_only(self):
        d = Dataset.from_arrays(np.zeros((3, 1)), ["p", "p", "q"])
        t = build_tree(d)
        for row in ([1.0], [-5.0], [None]):
            assert classify(t, row)[0] == "p"

    def test_missing_routes_to_majority_branch(self):
        # 6 rows go left, 4 go right; a missing value follows the left branch
        x = np.array([1, 2, 3, 4, 5, 6, 10, 11, 12, 13], dtype=float)
        d = Dataset.from_arrays(x[:, None], ["p"] * 6 + ["q"] * 4)
        t = build_tree(d, NO_PRUNE)
        assert t.root.majority_branch == 0
        label, counts = classify(t, [None])
        assert label == "p"
        assert list(counts) == [6.0, 0.0]

    def test_unseen_category_routes_to_majority(self):
        d = parse_dataset("c,y\na,p\na,p\na,p\nb,q\nb,q\n", "y")
        t = build_tree(d, NO_PRUNE)
        assert classify(t, {"c": "zzz"})[0] == "p"

    def test_separating_tree_on_clean_rows(self):
        d = separable(n=30, seed=9)
        t = build_tree(d)
        for i in range(d.n_rows):
            assert classify(t, d.row_values(i))[0] == d.labels[i]

    def test_wrong_row_length(self):
        t = build_tree(separable())
        with pytest.raises((ValueError, DatasetError)):
            classify(t, [1.0, 2.0])


class TestUsedAttributes:
    HEADER = (
        'dmtree-model 1\nkind "tree"\nclasses ["n", "y"]\npriors [0.5, 0.5]\n'
        + "".join(f'attribute {{"name": "g{i}", "kind": "continuous"}}\n' for i in range(1, 6))
    )

    def test_leaf_only(self):
        t = tree_from_text(self.HEADER + 'tree nodes=1\nroot leaf class="y" counts=1,2\n')
        assert used_attributes(t) == set()

    def test_depth_one(self):
        d = Dataset.from_arrays([[0.0, 0, 0], [0, 0, 1.0], [0, 0, 2.0], [0, 0, 3.0]], ["n", "n", "y", "y"], ["g1", "g2", "g3"])
        t = build_tree(d, NO_PRUNE)
        assert used_attributes(t) == {"g3"}

    def test_repeated_attribute(self):
        body = (
            "tree nodes=7\n"
            'root split attr="g1" threshold=0.5 majority=0 counts=4,4\n'
            '  <= split attr="g1" threshold=-1.0 majority=0 counts=4,1\n'
            '    <= leaf class="n" counts=2,0\n'
            '    > leaf class="n" counts=2,1\n'
            '  > split attr="g5" threshold=2.0 majority=0 counts=0,3\n'
            '    <= leaf class="y" counts=0,2\n'
            '    > leaf class="y" counts=0,1\n'
        )
        t = tree_from_text(self.HEADER + body)
        assert used_attributes(t) == {"g1", "g5"}
        assert t.size == 7


def _paths_ok(node, schema, seen=frozenset()):
    if node.is_leaf:
        return True
    if node.test.form == CATEGORICAL_TEST:
        if node.test.attribute in seen:
            return False
        seen = seen | {node.test.attribute}
    return all(_paths_ok(ch, schema, seen) for ch in node.children)


def _nodes(node):
    yield node
    for ch in node.children:
        yield from _nodes(ch)


class TestCandidateCuts:
    def test_no_cut_between_groups_of_one_shared_class(self):
        # values 1,1,2,2,2,2 and 4 are all class a, 5 is class b. With two
        # rows per branch the cut at 4.5 is too small and the cut at 3.0 joins
        # two pure-a groups, so no valid candidate remains for this attribute
        d = Dataset.from_arrays([[1.0], [1.0], [2.0], [2.0], [2.0], [2.0], [4.0], [5.0]], ["a"] * 7 + ["b"])
        assert best_split(d, None, d.names) is None
        assert best_split(d, None, d.names, TreeParams(min_leaf_instances=1)).threshold == 4.5


class TestProperties:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 100_000))
    def test_structure(self, seed):
        rng = np.random.default_rng(seed)
        d = random_mixed(rng, int(rng.integers(5, 60)), int(rng.integers(1, 8)), n_classes=3, missing=0.05)
        pruned = build_tree(d)
        unpruned = build_tree(d, TreeParams(2, 1.0))
        assert build_tree(d) == pruned  # determinism
        assert pruned.size <= unpruned.size
        for t in (pruned, unpruned):
            for node in _nodes(t.root):
                assert node.size == 1 + sum(ch.size for ch in node.children)
                assert node.label == int(np.argmax(node.counts)) or node.counts[node.label] == node.counts.max()
            assert _paths_ok(t.root, d.schema)
            labels, _ = t.predict_counts(np.asarray(d.X))
            assert labels.shape == (d.n_rows,)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 100_000))
    def test_impure_leaves_have_no_valid_split(self, seed):
        # growth stops at an impure leaf only when no split is available
        rng = np.random.default_rng(seed)
        d = random_mixed(rng, int(rng.integers(5, 50)), int(rng.integers(1, 5)), cat_fraction=0.0)
        t = build_tree(d, NO_PRUNE)
        X = np.asarray(d.X)
        for leaf_rows in _leaf_rows(t, X):
            sub = d.subset(leaf_rows)
            if len(set(sub.labels.tolist())) > 1:
                assert best_split(sub, None, sub.names, NO_PRUNE) is None

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 100_000))
    def test_chosen_test_is_best_eligible(self, seed):
        # every internal test has the top ratio among tests whose gain is at
        # least the mean positive gain, recomputed with the brute-force oracle
        rng = np.random.default_rng(seed)
        n = int(rng.integers(10, 60))
        m = int(rng.integers(2, 5))
        X = rng.integers(0, 6, size=(n, m)).astype(float)
        y = (X[:, 0] + rng.integers(0, 3, n) > 3).astype(int)
        d = Dataset.from_arrays(X, np.where(y == 1, "b", "a"))
        if len(d.classes) < 2:
            return
        t = build_tree(d, TreeParams(2, 1.0))
        for node, rows in _internal_rows(t, X):
            scored = _oracle_scores(X[rows], d.labels[rows].tolist(), min_leaf=2)
            positive = [g for g, _ in scored.values() if g > 1e-9]
            mean = sum(positive) / len(positive)
            eligible = [r for g, r in scored.values() if g > 1e-9 and g >= mean - 1e-9]
            chosen = scored[d.index_of(node.test.attribute)][1]
            assert chosen >= max(eligible) - 1e-9


def _oracle_scores(X, labels, min_leaf):
    out = {}
    rows = [tuple(r) for r in X.tolist()]
    n = len(labels)
    for j in range(X.shape[1]):
        best = None
        groups = {}
        for r, lab in zip(rows, labels):
            groups.setdefault(r[j], set()).add(lab)
        for thr, gain, _ in oracle.threshold_gain_ratios(rows, labels, j):
            left = sum(1 for r in rows if r[j] <= thr)
            if left < min_leaf or n - left < min_leaf:
                continue
            # candidate cuts separate value groups whose class make-up differs
            lo = max(v for v in groups if v <= thr)
            hi = min(v for v in groups if v > thr)
            if len(groups[lo]) == 1 and groups[lo] == groups[hi]:
                continue
            if best is None or gain > best[1] + 1e-12:
                best = (thr, gain)
        if best is None:
            continue
        ratio = oracle.penalized_threshold_ratio(rows, labels, j, best[0])
        distinct = len({r[j] for r in rows})
        out[j] = (best[1] - math.log2(distinct - 1) / n, ratio)
    return out


def _route(t: DecisionTree, X):
    stack = [(t.root, np.arange(X.shape[0]))]
    while stack:
        node, rows = stack.pop()
        yield node, rows
        if node.is_leaf:
            continue
        v = X[rows, node.column]
        left = v <= node.test.threshold
        stack.append((node.children[0], rows[left]))
        stack.append((node.children[1], rows[~left]))


def _leaf_rows(t, X):
    return [rows for node, rows in _route(t, X) if node.is_leaf and rows.size]


def _internal_rows(t, X):
    return [(node, rows) for node, rows in _route(t, X) if not node.is_leaf]
