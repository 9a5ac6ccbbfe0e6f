import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_dataset
from gcompml.data import BINARY, DesignConfig, TrialDataset
from gcompml.errors import DegenerateMarginal
from gcompml.gcomp import MarginalEffect, estimate_marginal, raw_proportions
from gcompml.learners import FittedOutcomeModel, LearnerSpec, fit_learner
from gcompml.data import build_design


@given(st.integers(0, 10_000), st.integers(8, 80))
def test_arm_only_logistic_reproduces_raw_difference(seed, n):
    data = make_dataset(n=n, seed=seed, effect=0.5)
    if len(set(data.a)) < 2 or any(len(set(data.y[data.a == k])) < 2 for k in (0, 1)):
        return
    eff = estimate_marginal(fit_learner(LearnerSpec("unadjusted"), data), data)
    p1 = data.y[data.a == 1].mean()
    p0 = data.y[data.a == 0].mean()
    assert abs(eff.delta - (p1 - p0)) <= 1e-10
    assert abs(eff.pi0 - p0) <= 1e-10 and abs(eff.pi1 - p1) <= 1e-10


def test_saturated_two_by_two():
    # one binary covariate, arm, and their interaction: saturated for 4 cells
    a = np.array([0, 0, 0, 0, 1, 1, 1, 1, 0, 0, 1, 1, 0, 1, 0, 1] * 2, dtype=float)
    x = np.array([0, 0, 1, 1, 0, 0, 1, 1, 0, 1, 0, 1, 1, 0, 0, 1] * 2, dtype=float)
    y = np.array([0, 1, 1, 1, 1, 1, 0, 1, 0, 0, 0, 1, 0, 1, 0, 0] * 2, dtype=float)
    data = TrialDataset(y, a, x[:, None], (BINARY,), ("x",))
    spec = LearnerSpec("logistic", design=DesignConfig(use_splines=False))
    eff = estimate_marginal(fit_learner(spec, data), data)
    # closed form: cell proportions standardized to the covariate distribution
    px = x.mean()
    cell = lambda k, v: y[(a == k) & (x == v)].mean()  # noqa: E731
    pi1 = (1 - px) * cell(1, 0) + px * cell(1, 1)
    pi0 = (1 - px) * cell(0, 0) + px * cell(0, 1)
    assert abs(eff.delta - (pi1 - pi0)) <= 1e-10


def test_model_ignoring_arm_gives_null(small_data):
    t = build_design(small_data, DesignConfig.plain()).transform
    coef = np.zeros(len(t.column_names))
    coef[0] = 0.7
    m = FittedOutcomeModel("logistic", {"intercept": -0.2, "coef": coef}, t)
    eff = estimate_marginal(m, small_data)
    assert eff.delta == 0.0 and eff.log_mor == 0.0


def test_permutation_invariance(small_data):
    m = fit_learner(LearnerSpec("logistic"), small_data)
    perm = np.random.default_rng(0).permutation(small_data.n)
    e1 = estimate_marginal(m, small_data)
    e2 = estimate_marginal(m, small_data.subset(perm))
    assert e1.delta == pytest.approx(e2.delta, abs=1e-14)
    assert e1.log_mor == pytest.approx(e2.log_mor, abs=1e-13)


def test_sign_follows_arm_coefficient_without_interactions(small_data):
    spec = LearnerSpec("logistic", design=DesignConfig(use_treatment_interactions=False))
    m = fit_learner(spec, small_data)
    eff = estimate_marginal(m, small_data)
    assert math.copysign(1, eff.delta) == math.copysign(1, m.params["coef"][m.transform.arm_column])


def test_subset_and_invariants(small_data):
    m = fit_learner(LearnerSpec("logistic"), small_data)
    eff = estimate_marginal(m, small_data, subset=[0, 3, 5])
    assert eff.over_population == 3
    assert eff.delta == pytest.approx(eff.pi1 - eff.pi0, abs=1e-12)
    lor = math.log(eff.pi1 / (1 - eff.pi1)) - math.log(eff.pi0 / (1 - eff.pi0))
    assert eff.log_mor == pytest.approx(lor, abs=1e-12)
    with pytest.raises(ValueError):
        estimate_marginal(m, small_data, subset=[])


def test_degenerate_marginal():
    with pytest.raises(DegenerateMarginal):
        MarginalEffect.from_probabilities(0.0, 0.4, 10)
    with pytest.raises(DegenerateMarginal):
        MarginalEffect.from_probabilities(0.3, 1.0, 10)
    data = TrialDataset([0, 1, 0, 1], [1, 1, 1, 1], np.zeros((4, 0)), (), ())
    with pytest.raises(DegenerateMarginal):
        raw_proportions(data)
