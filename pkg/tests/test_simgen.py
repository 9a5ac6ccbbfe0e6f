import math

import numpy as np
import pytest
from scipy.stats import norm

from gcompml.simgen import (EFFECTS, ScenarioSpec, calibrate_truth, generate_complex,
                            generate_simple, simulate, theoretical_auc)

N_BIG = 1_000_000


@pytest.fixture(scope="module")
def complex_big():
    return generate_complex(N_BIG, math.log(3.0), seed=1)


def test_arm_is_fair_coin(complex_big):
    assert abs(complex_big.a.mean() - 0.5) <= 0.002


def test_x5_prevalence_matches_gaussian_tail(complex_big):
    target = norm.sf(0.67)
    assert target == pytest.approx(0.2514, abs=1e-4)
    se = math.sqrt(target * (1 - target) / N_BIG)
    assert abs(complex_big.x[:, 4].mean() - target) <= 3 * se


def test_arm_independent_of_covariates(complex_big):
    for j in range(complex_big.p):
        assert abs(np.corrcoef(complex_big.a, complex_big.x[:, j])[0, 1]) < 0.01


def test_simple_binary_prevalences():
    data = generate_simple(N_BIG, math.log(3.0), seed=2)
    for j, cut in ((3, -0.67), (4, 0.0), (5, 0.67)):
        target = norm.cdf(cut)
        se = math.sqrt(target * (1 - target) / N_BIG)
        assert abs(data.x[:, j].mean() - target) <= 3 * se
    assert abs(np.corrcoef(data.a, data.x[:, 0])[0, 1]) < 0.01


def test_effect_table():
    assert EFFECTS["complex"][1.9] == math.log(3.0)
    assert EFFECTS["complex"][1.3] == math.log(1.5)
    assert EFFECTS["complex"][1.0] == math.log(0.9729)
    assert EFFECTS["simple"] == {1.9: math.log(3.0), 1.3: math.log(1.5), 1.0: 0.0}
    assert EFFECTS["simple_reduced"] == {3.0: math.log(3.0), 1.5: math.log(1.5), 1.0: 0.0}
    assert ScenarioSpec.from_mor("simple", 10, 1.9).beta == math.log(3.0)
    with pytest.raises(ValueError):
        ScenarioSpec.from_mor("simple", 10, 2.5)


def test_noise_covariates_do_not_enter_outcome():
    spec = ScenarioSpec("simple", 500, 0.4)
    x, a, eta, _ = simulate(spec, np.random.default_rng(0))
    x2 = x.copy()
    x2[:, 2] += 5.0
    x2[:, 5] = 1 - x2[:, 5]
    lin = lambda m: -3.0 + math.log(4.0) * (m[:, 0] + m[:, 1] + m[:, 3] + m[:, 4]) + 0.4 * a  # noqa: E731
    np.testing.assert_allclose(eta, lin(x), atol=1e-12)
    np.testing.assert_allclose(lin(x2), eta, atol=1e-12)


def test_generation_is_deterministic():
    a = generate_complex(50, 0.3, seed=5)
    b = generate_complex(50, 0.3, seed=5)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)
    assert a.p == 17 and generate_simple(5, 0.0, seed=1).p == 6


def test_calibration_matches_direct_average():
    spec = ScenarioSpec.from_mor("simple", 200, 1.9)
    tr = calibrate_truth(spec, 50, seed=3)
    assert tr.n_reps == 50
    assert tr.delta == pytest.approx(tr.pi1 - tr.pi0, abs=1e-12)
    assert 0.2 < tr.pi0 < 0.28 and tr.mc_se > 0


def test_theoretical_auc_is_reproducible():
    spec = ScenarioSpec.from_mor("simple", 200, 1.9)
    v = theoretical_auc(spec, n=20_000, seed=1)
    assert v == theoretical_auc(spec, n=20_000, seed=1)
    assert abs(v - 0.8835) < 0.02
