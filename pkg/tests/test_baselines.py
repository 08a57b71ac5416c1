import math

import numpy as np
import pytest

from dmtree import rng as rngs
from dmtree.baselines import (
    ERRORLESS_WEIGHT,
    EnsembleModel,
    RandomSplitParams,
    _bootstrap_weights,
    build_adaboost,
    build_bagging,
    build_random_forest,
    build_random_tree_ensemble,
    classify_ensemble,
)
from dmtree.dataset import Dataset, DatasetError, conform
from dmtree.serialize import model_from_text
from dmtree.stats import accuracy
from dmtree.tree import TreeParams, _NodeData, build_tree, fit_tree, ranked_tests, tree_body_lines, used_attributes
from dmtree.voting import breakdown, tie_break_rank
from tests.conftest import random_mixed, separable

BUILDERS = {
    "bagging": lambda d, s: build_bagging(d, 5, seed=s),
    "adaboost": lambda d, s: build_adaboost(d, 5, seed=s),
    "random_forest": lambda d, s: build_random_forest(d, 5, seed=s),
    "random_tree": lambda d, s: build_random_tree_ensemble(d, 5, seed=s),
}


def noisy(n=120, m=8, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, m))
    y = (X[:, 0] + X[:, 1] + 0.8 * rng.standard_normal(n) > 0).astype(int)
    return Dataset.from_arrays(X, np.where(y == 1, "pos", "neg"), name="noisy")


class TestDeterminism:
    @pytest.mark.parametrize("kind", sorted(BUILDERS))
    def test_same_seed_same_bytes(self, kind):
        d = noisy()
        a = BUILDERS[kind](d, 3).to_text()
        assert BUILDERS[kind](d, 3).to_text() == a

    @pytest.mark.parametrize("kind", ["bagging", "random_forest", "random_tree"])
    def test_seed_changes_members(self, kind):
        d = noisy()
        assert BUILDERS[kind](d, 1).to_text() != BUILDERS[kind](d, 2).to_text()

    @pytest.mark.parametrize("kind", sorted(BUILDERS))
    def test_round_trip(self, kind):
        d = random_mixed(np.random.default_rng(6), 60, 6, n_classes=3)
        e = BUILDERS[kind](d, 9)
        back = model_from_text(e.to_text())
        assert isinstance(back, EnsembleModel)
        assert back.to_text() == e.to_text()
        assert back.aggregation == ("weighted" if kind == "adaboost" else "majority")


class TestBagging:
    def test_single_member_is_bootstrap_tree(self):
        d = noisy()
        e = build_bagging(d, 1, seed=4)
        w = _bootstrap_weights(rngs.stream(4, rngs.MEMBER, 0), d.n_rows)
        rows = np.repeat(np.arange(d.n_rows), w.astype(int))
        # training on multiplicities equals training on the duplicated rows
        pri = d.class_priors()
        dup = fit_tree(d.subset(rows), TreeParams(), classes=d.classes, priors=[pri[c] for c in d.classes])
        assert tree_body_lines(e.members[0]) == tree_body_lines(dup)

    def test_separable_training_accuracy(self):
        d = separable(n=60, seed=2)
        e = build_bagging(d, 11, seed=0)
        assert accuracy(e, d) == 1.0

    def test_default_size(self):
        d = separable(n=20)
        assert len(build_bagging(d).members) == 100

    def test_bootstrap_fraction(self):
        n = 1000
        fr = [np.count_nonzero(_bootstrap_weights(rngs.stream(s, rngs.MEMBER, 0), n)) / n for s in range(200)]
        assert abs(np.mean(fr) - (1 - (1 - 1 / n) ** n)) < 0.02

    def test_empty(self):
        with pytest.raises(DatasetError):
            build_bagging(Dataset.from_arrays(np.empty((0, 1)), []), 3)

    def test_bad_members(self):
        with pytest.raises(ValueError):
            build_bagging(separable(), 0)


class TestAdaBoost:
    def test_member_weight_formula(self):
        eps = 0.25
        assert math.log((1 - eps) / eps) == pytest.approx(1.0986, abs=1e-4)

    def test_errorless_first_round_stops(self):
        d = separable(n=40)
        e = build_adaboost(d, 10)
        assert len(e.members) == 1
        assert e.member_weights == [ERRORLESS_WEIGHT]

    def test_weights_renormalize_and_alphas_match(self):
        d = noisy(seed=3)
        e = build_adaboost(d, 20)
        assert len(e.members) <= 20
        for s in e.trace["weight_sums"]:
            assert abs(s - 1.0) < 1e-9
        for err, alpha in zip(e.trace["errors"], e.member_weights):
            if 0 < err < 0.5:
                assert alpha == pytest.approx(math.log((1 - err) / err))
                assert math.isfinite(alpha) and alpha > 0

    def test_second_round_error_uses_updated_weights(self):
        d = noisy(seed=5)
        y = d.class_codes()
        X = np.asarray(d.X)
        e = build_adaboost(d, 2)
        assert len(e.members) == 2
        err1 = e.trace["errors"][0]
        wrong1 = e.members[0].predict(X) != y
        assert err1 == pytest.approx(wrong1.mean())
        # correct rows shrink by err/(1-err), then everything renormalizes
        w = np.where(wrong1, 1.0, err1 / (1 - err1))
        w /= w.sum()
        assert w[wrong1].sum() == pytest.approx(0.5)
        wrong2 = e.members[1].predict(X) != y
        assert e.trace["errors"][1] == pytest.approx(w[wrong2].sum(), abs=1e-12)

    def test_default_rounds_cap(self):
        d = noisy(n=60, seed=1)
        assert len(build_adaboost(d, 100).members) <= 100


class TestRandomForest:
    def test_default_subset_size(self):
        assert RandomSplitParams().subset_size(500) == 9
        assert RandomSplitParams().subset_size(1) == 1

    def test_subset_too_large(self):
        with pytest.raises(ValueError):
            RandomSplitParams(forest_subset_size=10).subset_size(5)

    def test_full_subset_uses_c45_choice(self):
        d = noisy(seed=2)
        full = build_random_forest(d, 3, RandomSplitParams(forest_subset_size=d.n_attributes), seed=1)
        bag = build_bagging(d, 3, TreeParams(1, 1.0), seed=1)
        # identical bootstrap streams and split choice give identical members
        assert [t.to_text() for t in full.members] == [t.to_text() for t in bag.members]

    def test_unpruned_members(self):
        d = noisy(seed=4)
        e = build_random_forest(d, 3, seed=0)
        assert all(t.size > 3 for t in e.members)

    def test_size_one_subset_varies_roots(self):
        d = noisy(m=10, seed=6)
        e = build_random_forest(d, 20, RandomSplitParams(forest_subset_size=1), seed=0)
        roots = {t.root.test.attribute for t in e.members if t.root.test is not None}
        assert len(roots) > 3


class TestRandomTrees:
    def test_single_positive_test_always_chosen(self):
        X = np.column_stack([[0, 0, 0, 1, 1, 1.0], np.zeros(6)])
        d = Dataset.from_arrays(X, ["a", "a", "a", "b", "b", "b"])
        e = build_random_tree_ensemble(d, 10, seed=3)
        assert all(used_attributes(t) == {"a0"} for t in e.members)

    def test_different_seeds_different_roots(self):
        rng = np.random.default_rng(0)
        y = np.arange(200) % 2
        X = np.column_stack([y + 0.5 * rng.standard_normal(200) for _ in range(30)])
        d = Dataset.from_arrays(X, np.where(y == 1, "b", "a"))
        roots = {build_random_tree_ensemble(d, 1, seed=s).members[0].root.test.attribute for s in range(6)}
        assert len(roots) > 1

    def test_root_choice_in_top_pool(self):
        d = noisy(seed=8)
        node = _NodeData(d.X, d.class_codes(), np.ones(d.n_rows), 2, np.arange(d.n_rows))
        ranked = ranked_tests(node, np.arange(d.n_attributes), d.schema, 2.0)
        top = {(d.schema[c.column].name, c.threshold) for c in ranked[:20]}
        for s in range(10):
            t = build_random_tree_ensemble(d, 1, seed=s).members[0]
            if t.root.test is not None:
                assert (t.root.test.attribute, t.root.test.threshold) in top

    def test_default_members(self):
        assert len(build_random_tree_ensemble(separable(n=20)).members) == 100


class TestAggregation:
    def test_uniform_majority(self):
        rank = tie_break_rank(("n", "y"), (0.5, 0.5))
        assert breakdown(("n", "y"), rank, ["y", "n", "y"], [1, 1, 1]).winner == "y"

    def test_weighted(self):
        rank = tie_break_rank(("n", "y"), (0.5, 0.5))
        assert breakdown(("n", "y"), rank, ["n", "y", "y"], [2.0, 0.9, 0.9]).winner == "n"

    def test_single_member(self):
        d = noisy(seed=9)
        e = build_bagging(d, 1, seed=0)
        for i in range(10):
            b = classify_ensemble(e, d.row_values(i))
            assert b.winner == e.classes[e.members[0].predict(conform(d.subset([i]), e.schema))[0]]

    def test_invalid_models(self):
        t = build_tree(separable())
        with pytest.raises(ValueError):
            EnsembleModel([], [], "bagging")
        with pytest.raises(ValueError):
            EnsembleModel([t], [1.0, 2.0], "bagging")
        with pytest.raises(ValueError):
            EnsembleModel([t], [1.0], "stacking")
