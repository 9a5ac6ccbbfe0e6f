"""Out-of-bag nonparametric bootstrap for G-computation estimates.

Hyperparameters are fixed beforehand (tuned once on the full data).  Each
replicate refits the learner on a resample and evaluates the marginal effect
on the individuals left out of that resample.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import TrialDataset
from .errors import DegenerateMarginal, GCompError, InferenceUnstable
from .gcomp import MarginalEffect, estimate_marginal
from .learners import FittedOutcomeModel, LearnerSpec, fit_learner
from .rng import child_seed, stream

log = logging.getLogger(__name__)

MAX_FAILED_FRACTION = 0.2
CHUNK = 25


@dataclass(frozen=True)
class BootstrapResult:
    point: MarginalEffect
    replicate_logmor: np.ndarray
    replicate_delta: np.ndarray
    replicate_index: np.ndarray
    sd_logmor: float
    sd_delta: float
    ci_logmor: tuple[float, float]
    ci_delta: tuple[float, float]
    n_failed: int
    b_requested: int
    failures: tuple[str, ...] = ()

    @property
    def b_effective(self) -> int:
        return self.b_requested - self.n_failed

    @property
    def wald_logmor(self) -> tuple[float, float]:
        """Auxiliary normal-approximation interval from the bootstrap SD."""
        return (self.point.log_mor - 1.959963984540054 * self.sd_logmor,
                self.point.log_mor + 1.959963984540054 * self.sd_logmor)


def resample(n: int, seed: int, b: int) -> tuple[np.ndarray, np.ndarray]:
    """In-bag indices (with replacement) and sorted out-of-bag indices of replicate ``b``."""
    idx = stream(seed, "boot", b).integers(0, n, size=n)
    mask = np.ones(n, dtype=bool)
    mask[idx] = False
    return idx, np.flatnonzero(mask)


def percentile_interval(values, level: float = 0.95) -> tuple[float, float]:
    lo = (1.0 - level) / 2.0
    q = np.quantile(np.asarray(values, dtype=float), [lo, 1.0 - lo])
    return float(q[0]), float(q[1])


def _replicate(data: TrialDataset, spec: LearnerSpec, seed: int, b: int):
    idx, oob = resample(data.n, seed, b)
    if oob.size == 0:
        return None, "empty out-of-bag set"
    if np.intersect1d(idx, oob).size:
        raise AssertionError("in-bag and out-of-bag sets overlap")
    a_oob = data.a[oob]
    if a_oob.min() == a_oob.max():
        return None, "out-of-bag set contains one arm"
    try:
        model = fit_learner(spec, data.subset(idx), seed=child_seed(seed, "boot-fit", b))
        eff = estimate_marginal(model, data, subset=oob)
    except (GCompError, ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        return None, f"{type(exc).__name__}: {exc}"
    if not (math.isfinite(eff.log_mor) and math.isfinite(eff.delta)):
        return None, "non-finite estimate"
    return (eff.log_mor, eff.delta), None


def _run_chunk(args):
    data, spec, seed, indices = args
    return [(b, *_replicate(data, spec, seed, b)) for b in indices]


def bootstrap_effect(data: TrialDataset, spec: LearnerSpec, n_boot: int, seed: int,
                     point_model: FittedOutcomeModel | None = None,
                     workers: int = 1) -> BootstrapResult:
    """Point estimate on the full data plus out-of-bag bootstrap SD and percentile CI.

    Raises :class:`InferenceUnstable` when more than 20% of the replicates fail.
    """
    if n_boot < 2:
        raise ValueError("need at least 2 bootstrap replicates")
    if point_model is None:
        point_model = fit_learner(spec, data, seed=child_seed(seed, "point-fit"))
    point = estimate_marginal(point_model, data)
    chunks = [range(s, min(s + CHUNK, n_boot)) for s in range(0, n_boot, CHUNK)]
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, [(data, spec, seed, c) for c in chunks]))
    else:
        parts = [_run_chunk((data, spec, seed, c)) for c in chunks]
    results = [r for part in parts for r in part]
    ok = [(b, v) for b, v, _ in results if v is not None]
    failures = tuple(f"replicate {b}: {why}" for b, v, why in results if v is None)
    n_failed = len(failures)
    if n_failed > MAX_FAILED_FRACTION * n_boot or len(ok) < 2:
        raise InferenceUnstable(f"{n_failed} of {n_boot} bootstrap replicates failed")
    if n_failed:
        log.debug("%d bootstrap replicates failed", n_failed)
    index = np.array([b for b, _ in ok], dtype=np.intp)
    lm = np.array([v[0] for _, v in ok])
    dl = np.array([v[1] for _, v in ok])
    return BootstrapResult(
        point=point, replicate_logmor=lm, replicate_delta=dl, replicate_index=index,
        sd_logmor=float(np.std(lm, ddof=1)), sd_delta=float(np.std(dl, ddof=1)),
        ci_logmor=percentile_interval(lm), ci_delta=percentile_interval(dl),
        n_failed=n_failed, b_requested=n_boot, failures=failures)
