import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_dataset
from gcompml.data import DesignConfig
from gcompml.learners import LearnerSpec, fit_learner
from gcompml.tuning import (TuningGrid, compute_auc, cv_auc, default_grid, fold_aucs,
                            grid_search, make_folds, select_best)


def pairwise_auc(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l != 1]
    tot = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p in pos for q in neg)
    return tot / (len(pos) * len(neg))


# ---------------------------------------------------------------- AUC


def test_auc_trivial_values():
    assert compute_auc([0.3, 0.3, 0.3, 0.3], [0, 1, 0, 1]) == 0.5
    assert compute_auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert compute_auc([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == 0.0


def test_auc_needs_both_classes():
    with pytest.raises(ValueError):
        compute_auc([0.1, 0.2], [1, 1])


@given(st.lists(st.tuples(st.integers(0, 6), st.booleans()), min_size=2, max_size=40))
def test_auc_matches_pairwise_oracle(rows):
    scores = [s / 7 for s, _ in rows]
    labels = [int(b) for _, b in rows]
    if len(set(labels)) < 2:
        return
    assert compute_auc(scores, labels) == pytest.approx(pairwise_auc(scores, labels), abs=1e-12)


# ---------------------------------------------------------------- folds


def test_folds_exact_division():
    y = np.r_[np.ones(13), np.zeros(27)]
    plan = make_folds(40, 20, y, 0)
    assert np.all(plan.sizes() == 2)


def test_folds_stratify_events():
    y = np.r_[np.ones(5), np.zeros(5)]
    plan = make_folds(10, 5, y, 3)
    assert np.all(np.bincount(plan.folds[y == 1], minlength=5) == 1)


@given(st.integers(2, 120), st.integers(0, 10**6), st.floats(0.0, 1.0))
def test_fold_invariants(n, seed, rate):
    k = min(20, n)
    y = (np.random.default_rng(seed).random(n) < rate).astype(float)
    plan = make_folds(n, k, y, seed)
    sizes = plan.sizes()
    assert sizes.max() - sizes.min() <= 1
    events = np.bincount(plan.folds[y == 1], minlength=k)
    assert events.max() - events.min() <= 1
    assert np.array_equal(make_folds(n, k, y, seed).folds, plan.folds)
    assert set(plan.zero_event_folds) == set(np.flatnonzero(events == 0)) or y.sum() == 0


def test_fold_errors():
    with pytest.raises(ValueError):
        make_folds(5, 6, np.zeros(5), 0)
    with pytest.raises(ValueError):
        make_folds(5, 2, np.zeros(4), 0)


def test_mean_cv_auc_ignores_fold_order():
    rng = np.random.default_rng(0)
    y = (rng.random(50) < 0.4).astype(float)
    pred = rng.random(50)
    plan = make_folds(50, 10, y, 1)
    perm = rng.permutation(10)
    relabeled = type(plan)(perm[plan.folds], plan.k, plan.seed)
    assert cv_auc(pred, y, relabeled) == pytest.approx(cv_auc(pred, y, plan), abs=1e-15)
    a = fold_aucs(pred, y, plan)
    assert np.isnan(a).sum() == 0


# ---------------------------------------------------------------- selection


def test_tie_breaks_toward_larger_lambda():
    grid = TuningGrid("lasso", ({"lambda": 0.1}, {"lambda": 0.5}))
    assert select_best(np.array([0.7, 0.7]), grid.reg_keys) == 1


def test_tie_breaks_toward_smaller_size_and_cost():
    nn = TuningGrid("neuralnet", ({"hidden_size": 3}, {"hidden_size": 1}))
    assert select_best(np.array([0.6, 0.6]), nn.reg_keys) == 1
    sv = TuningGrid("svm_rbf", ({"cost": 1.0}, {"cost": 4.0}, {"cost": 0.5}))
    assert select_best(np.array([0.6, 0.61, 0.61]), sv.reg_keys) == 2
    assert select_best(np.array([0.6, 0.62, 0.61]), sv.reg_keys) == 1


def test_singleton_grid_returns_its_candidate(small_data):
    grid = TuningGrid("lasso", ({"lambda": 0.05},), DesignConfig())
    res = grid_search(small_data, grid, k=5, seed=0)
    assert res.best == {"lambda": 0.05} and res.best_index == 0


def test_empty_grid_rejected():
    with pytest.raises(ValueError):
        TuningGrid("lasso", ())


@pytest.mark.parametrize("kind,grid_params", [
    ("lasso", ({"lambda": 0.2}, {"lambda": 0.01})),
    ("svm_rbf", ({"cost": 0.5, "gamma": 0.2}, {"cost": 8.0, "gamma": 0.2})),
])
def test_grid_search_matches_hand_cv(kind, grid_params):
    data = make_dataset(n=40, seed=9, effect=1.0)
    design = DesignConfig() if kind == "lasso" else DesignConfig.plain()
    grid = TuningGrid(kind, grid_params, design)
    res = grid_search(data, grid, k=4, seed=6)
    plan = make_folds(data.n, 4, data.y, 6)
    hand = np.zeros((2, 4))
    for f in range(4):
        train, test = plan.split(f)
        for c, cand in enumerate(grid_params):
            m = fit_learner(LearnerSpec(kind, cand, design), data.subset(train))
            hand[c, f] = pairwise_auc(m.predict(data.a[test], data.x[test]), data.y[test])
    np.testing.assert_allclose(res.fold_auc, hand, atol=1e-6)
    np.testing.assert_allclose(res.mean_auc, hand.mean(axis=1), atol=1e-6)
    assert res.best_index == select_best(hand.mean(axis=1), grid.reg_keys)


def test_failed_candidate_scores_one_half(small_data):
    grid = TuningGrid("svm_rbf", ({"cost": -1.0, "gamma": 1.0},), DesignConfig.plain())
    with pytest.warns(RuntimeWarning, match="fold fits failed"):
        res = grid_search(small_data, grid, k=4, seed=0)
    assert res.mean_auc[0] == 0.5 and res.n_failures == 4


def test_default_grids_have_length_twenty(small_data):
    lasso = default_grid("lasso", small_data)
    assert len(lasso.candidates) == 20
    lams = [c["lambda"] for c in lasso.candidates]
    assert lams[-1] / lams[0] == pytest.approx(1e-4)
    assert len(default_grid("elasticnet", small_data).candidates) == 200
    assert [c["hidden_size"] for c in default_grid("neuralnet", small_data).candidates] == \
        list(range(1, 21))
    costs = [c["cost"] for c in default_grid("svm_rbf", small_data).candidates]
    assert costs[0] == 2.0 ** -5 and costs[-1] == 2.0 ** 14
    with pytest.raises(ValueError):
        default_grid("unadjusted", small_data)


def test_grid_search_is_deterministic(small_data):
    grid = default_grid("lasso", small_data, length=5)
    r1 = grid_search(small_data, grid, k=5, seed=2)
    r2 = grid_search(small_data, grid, k=5, seed=2)
    assert np.array_equal(r1.mean_auc, r2.mean_auc) and r1.best == r2.best
