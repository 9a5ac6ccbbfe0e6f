"""Simulated randomized trials and calibration of the true marginal effects.

Two designs are available.  The complex one has 17 covariates generated in
sequence with Gaussian dependence chains and thresholded Gaussian binaries;
the outcome model has step functions, quadratic terms and one arm-covariate
interaction.  The simple one has 6 independent covariates (2 pure noise) and
a main-effects logistic outcome; its "reduced" variant uses weaker
coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import BINARY, CONTINUOUS, TrialDataset
from .rng import stream
from .tuning import compute_auc

SCENARIOS = ("complex", "simple", "simple_reduced")

# arm coefficient giving each target marginal odds ratio
EFFECTS = {
    "complex": {1.9: math.log(3.0), 1.3: math.log(1.5), 1.0: math.log(0.9729)},
    "simple": {1.9: math.log(3.0), 1.3: math.log(1.5), 1.0: math.log(1.0)},
    "simple_reduced": {3.0: math.log(3.0), 1.5: math.log(1.5), 1.0: math.log(1.0)},
}

# complex design: outcome intercept and slope, and the covariate-chain coefficients.
# The chains use log(2) where the outcome uses its intercept -2; this
# reproduces pi0 = 0.4604, pi1 = 0.6106 and AUC 0.890 at mOR 1.9.
C_B0, C_B1, C_B2, C_B3 = -0.4, math.log(2.0), -2.0, math.log(2.0)
C_CHAIN_B2 = math.log(2.0)
# simple design (intercept, common slope), standard and reduced
SIMPLE_COEF = (-3.0, math.log(4.0))
REDUCED_COEF = (-0.6, 0.2)

COMPLEX_KINDS = (CONTINUOUS, CONTINUOUS, CONTINUOUS, CONTINUOUS, BINARY, BINARY, CONTINUOUS,
                 BINARY, CONTINUOUS, CONTINUOUS, BINARY, CONTINUOUS, CONTINUOUS, CONTINUOUS,
                 BINARY, BINARY, CONTINUOUS)
SIMPLE_KINDS = (CONTINUOUS, CONTINUOUS, CONTINUOUS, BINARY, BINARY, BINARY)


@dataclass(frozen=True)
class ScenarioSpec:
    scenario: str
    n: int
    beta: float
    mor: float | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.n < 2:
            raise ValueError("n must be >= 2")

    @classmethod
    def from_mor(cls, scenario: str, n: int, mor: float) -> "ScenarioSpec":
        table = EFFECTS[scenario]
        for label, beta in table.items():
            if math.isclose(label, mor):
                return cls(scenario, n, beta, label)
        raise ValueError(f"scenario {scenario!r} has no calibrated effect for mOR={mor}; "
                         f"choose one of {sorted(table)} or give the arm coefficient directly")

    @property
    def key(self) -> str:
        return f"{self.scenario}/beta={self.beta!r}"


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else stream(int(seed), "sim")


def _complex(n: int, beta4: float, rng: np.random.Generator):
    b0, b1, b2, b3 = C_B0, C_B1, C_B2, C_B3
    c2 = C_CHAIN_B2
    g = rng.standard_normal
    x = np.empty((n, 17))
    x[:, 0] = g(n)
    x[:, 1] = b0 + b1 * x[:, 0] + g(n)
    x[:, 2] = b0 - b1 * x[:, 0] - c2 * x[:, 1] + g(n)
    x[:, 3] = g(n)
    x[:, 4] = g(n) > 0.67
    x[:, 5] = (b0 - b1 * x[:, 3] + g(n)) > -0.40
    x[:, 6] = b0 - b1 * x[:, 4] + g(n)
    x[:, 7] = (b0 + b1 * x[:, 5] + g(n)) > -0.80
    x[:, 8] = b0 + b1 * x[:, 6] + g(n)
    x[:, 9] = g(n)
    x[:, 10] = (b0 + b1 * x[:, 7] + g(n)) > 0.84
    x[:, 11] = b0 - b1 * x[:, 10] - c2 * x[:, 9] + g(n)
    x[:, 12] = b0 - b1 * x[:, 10] + g(n)
    x[:, 13] = g(n)
    x[:, 14] = g(n) > 0.67
    x[:, 15] = g(n) > 0.67
    x[:, 16] = g(n)
    a = (g(n) > 0).astype(float)
    X = lambda j: x[:, j - 1]  # noqa: E731  (1-based covariate index)
    eta = (b2 + b3 * (X(2) > -0.44) - b3 * X(3) + (b3 / 2) * X(3) ** 2 + b3 * X(5) + b3 * X(6)
           + b3 * X(9) + (b3 / 2) * X(10) ** 2 - b3 * X(12) - b3 * (X(13) > -0.55)
           + b3 * X(14) + b3 * X(15) + (b3 / 2) * a * X(14) + beta4 * a)
    return x, a, eta


def _simple(n: int, beta2: float, reduced: bool, rng: np.random.Generator):
    c0, c1 = REDUCED_COEF if reduced else SIMPLE_COEF
    g = rng.standard_normal
    x = np.empty((n, 6))
    x[:, 0] = g(n)
    x[:, 1] = g(n)
    x[:, 2] = g(n)
    x[:, 3] = g(n) < -0.67
    x[:, 4] = g(n) < 0.0
    x[:, 5] = g(n) < 0.67
    a = (g(n) > 0).astype(float)
    eta = c0 + c1 * (x[:, 0] + x[:, 1] + x[:, 3] + x[:, 4]) + beta2 * a
    return x, a, eta


def simulate(spec: ScenarioSpec, rng, n: int | None = None):
    """Draw ``(x, a, eta, y)`` for ``spec`` (``n`` overrides ``spec.n``)."""
    rng = _rng(rng)
    n = spec.n if n is None else n
    if spec.scenario == "complex":
        x, a, eta = _complex(n, spec.beta, rng)
    else:
        x, a, eta = _simple(n, spec.beta, spec.scenario == "simple_reduced", rng)
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
    return x, a, eta, y


def _dataset(spec: ScenarioSpec, rng) -> TrialDataset:
    x, a, _, y = simulate(spec, rng)
    kinds = COMPLEX_KINDS if spec.scenario == "complex" else SIMPLE_KINDS
    return TrialDataset(y, a, x, kinds, tuple(f"x{j + 1}" for j in range(x.shape[1])))


def generate(spec: ScenarioSpec, rng) -> TrialDataset:
    return _dataset(spec, rng)


def generate_complex(n: int, beta4: float, seed) -> TrialDataset:
    return _dataset(ScenarioSpec("complex", n, beta4), seed)


def generate_simple(n: int, beta2: float, reduced: bool = False, seed=0) -> TrialDataset:
    return _dataset(ScenarioSpec("simple_reduced" if reduced else "simple", n, beta2), seed)


# --------------------------------------------------------------------------
# truth


@dataclass(frozen=True)
class TruthRecord:
    scenario: str
    beta: float
    mor: float | None
    n: int
    pi0: float
    pi1: float
    log_mor: float
    delta: float
    n_reps: int
    mc_se: float
    mc_se_delta: float
    n_resampled: int

    @property
    def key(self) -> str:
        return f"{self.scenario}/beta={self.beta!r}"


def truth_sums(spec: ScenarioSpec, seed: int, start: int, stop: int) -> np.ndarray:
    """Sums of (pi0, pi1, log OR, delta, log OR^2, delta^2, resampled) over replicates."""
    acc = np.zeros(7)
    for r in range(start, stop):
        attempt = 0
        while True:
            x, a, _, y = simulate(spec, stream(seed, "truth", r, attempt))
            treated = a == 1
            m1 = treated.sum()
            m0 = len(a) - m1
            if m1 and m0:
                p1 = y[treated].mean()
                p0 = y[~treated].mean()
                if 0 < p0 < 1 and 0 < p1 < 1:
                    break
            attempt += 1
        lor = math.log(p1 / (1 - p1)) - math.log(p0 / (1 - p0))
        d = p1 - p0
        acc += (p0, p1, lor, d, lor * lor, d * d, attempt)
    return acc


def truth_from_sums(spec: ScenarioSpec, sums: np.ndarray, n_reps: int) -> TruthRecord:
    mean = sums[:4] / n_reps
    var_lor = max(sums[4] - n_reps * mean[2] ** 2, 0.0) / max(n_reps - 1, 1)
    var_d = max(sums[5] - n_reps * mean[3] ** 2, 0.0) / max(n_reps - 1, 1)
    return TruthRecord(spec.scenario, spec.beta, spec.mor, spec.n, float(mean[0]),
                       float(mean[1]), float(mean[2]), float(mean[3]), int(n_reps),
                       math.sqrt(var_lor / n_reps), math.sqrt(var_d / n_reps), int(sums[6]))


def calibrate_truth(spec: ScenarioSpec, n_reps: int, seed: int) -> TruthRecord:
    """Mean unadjusted estimates over ``n_reps`` simulated trials of size ``spec.n``.

    A replicate with an empty arm or an arm with all or no events is redrawn.
    """
    if n_reps < 2:
        raise ValueError("n_reps must be >= 2")
    return truth_from_sums(spec, truth_sums(spec, seed, 0, n_reps), n_reps)


def theoretical_auc(spec: ScenarioSpec, n: int = 1_000_000, seed: int = 0) -> float:
    """Concordance between the true linear predictor and the outcome."""
    _, _, eta, y = simulate(spec, stream(seed, "auc"), n=n)
    return compute_auc(eta, y)
