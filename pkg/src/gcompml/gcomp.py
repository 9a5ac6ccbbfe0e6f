"""G-computation: average counterfactual predictions under each arm."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import TrialDataset
from .errors import DegenerateMarginal

DEGENERATE_TOL = 1e-12


@dataclass(frozen=True)
class MarginalEffect:
    pi0: float
    pi1: float
    delta: float
    log_mor: float
    over_population: int

    @classmethod
    def from_probabilities(cls, pi0: float, pi1: float, n: int) -> "MarginalEffect":
        pi0, pi1 = float(pi0), float(pi1)
        for pi in (pi0, pi1):
            if not (DEGENERATE_TOL < pi < 1.0 - DEGENERATE_TOL):
                raise DegenerateMarginal(f"marginal probability {pi!r} is degenerate")
        log_mor = math.log(pi1 / (1.0 - pi1)) - math.log(pi0 / (1.0 - pi0))
        return cls(pi0, pi1, pi1 - pi0, log_mor, int(n))

    @property
    def mor(self) -> float:
        return math.exp(self.log_mor)


def estimate_marginal(model, data: TrialDataset, subset=None) -> MarginalEffect:
    """Marginal event probabilities, risk difference and log odds ratio.

    Every individual in ``subset`` (all rows by default) is predicted under
    a=1 and a=0 and the predictions are averaged per arm.
    """
    x = data.x
    if subset is not None:
        subset = np.asarray(subset, dtype=np.intp)
        if subset.size == 0:
            raise ValueError("empty evaluation subset")
        x = x[subset]
    p1 = model.predict(1.0, x)
    p0 = model.predict(0.0, x)
    return MarginalEffect.from_probabilities(float(np.mean(p0)), float(np.mean(p1)), x.shape[0])


def raw_proportions(data: TrialDataset) -> MarginalEffect:
    """Unadjusted estimate from arm-wise event proportions."""
    treated = data.a == 1
    if treated.all() or not treated.any():
        raise DegenerateMarginal("one arm is empty")
    return MarginalEffect.from_probabilities(float(data.y[~treated].mean()),
                                             float(data.y[treated].mean()), data.n)
