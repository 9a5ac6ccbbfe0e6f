"""Per-dataset analysis: tune, fit, G-computation estimate and bootstrap, per learner."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .bootstrap import BootstrapResult, bootstrap_effect
from .data import DesignConfig, TrialDataset
from .errors import GCompError
from .learners import KINDS, LearnerSpec, default_design, fit_learner
from .rng import child_seed
from .tuning import FoldPlan, default_grid, fold_aucs, grid_search, make_folds, mean_cv_auc

log = logging.getLogger(__name__)

TUNED = ("lasso", "elasticnet", "neuralnet", "svm_rbf")
SL_BASES = ("lasso", "elasticnet", "neuralnet", "svm_rbf")
_FIT_ERRORS = (GCompError, ValueError, FloatingPointError, np.linalg.LinAlgError)


@dataclass(frozen=True)
class MethodResult:
    method: str
    status: str
    spec: LearnerSpec | None = None
    boot: BootstrapResult | None = None
    cv_auc: float = math.nan
    message: str = ""
    notes: tuple[str, ...] = field(default=())

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def oof_cv_auc(spec: LearnerSpec, data: TrialDataset, plan: FoldPlan, seed: int) -> float:
    """Mean per-fold AUC of out-of-fold predictions from ``spec``."""
    pred = np.full(data.n, np.nan)
    for f in range(plan.k):
        train_idx, test_idx = plan.split(f)
        if len(test_idx) == 0:
            continue
        try:
            m = fit_learner(spec, data.subset(train_idx), seed=child_seed(seed, "cv-fit", f))
            pred[test_idx] = m.predict(data.a[test_idx], data.x[test_idx])
        except _FIT_ERRORS:
            pass  # fold scored 0.5 below
    aucs = fold_aucs(pred, data.y, plan)
    return mean_cv_auc(aucs)


def tune(kind: str, data: TrialDataset, plan: FoldPlan, seed: int,
         design: DesignConfig | None = None, grid_options: dict | None = None):
    """Hyperparameters for ``kind`` chosen on the full data; returns ``(spec, cv_auc)``."""
    design = design or default_design(kind)
    if kind not in TUNED:
        spec = LearnerSpec(kind, {}, design)
        return spec, oof_cv_auc(spec, data, plan, seed)
    grid = default_grid(kind, data, design, **(grid_options or {}))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = grid_search(data, grid, plan=plan, seed=seed)
    return LearnerSpec(kind, res.best, design), float(res.mean_auc[res.best_index])


def analyze(data: TrialDataset, learners, n_boot: int, seed: int, folds: int = 20,
            designs: dict | None = None, grids: dict | None = None,
            workers: int = 1) -> list[MethodResult]:
    """Run every learner's pipeline on ``data``.

    All learners share one fold plan for tuning and one set of bootstrap
    resamples.  The super learner combines the tuned lasso, elastic net,
    neural net and SVM; its weights are fitted once on the full data and kept
    fixed across bootstrap replicates.  A learner that fails yields a result
    with a ``failed:`` status instead of raising.
    """
    designs = designs or {}
    grids = grids or {}
    for kind in learners:
        if kind not in KINDS:
            raise ValueError(f"unknown learner kind {kind!r}")
    plan = make_folds(data.n, min(folds, data.n), data.y, child_seed(seed, "folds"))
    boot_seed = child_seed(seed, "boot")
    tuned: dict[str, tuple[LearnerSpec, float]] = {}

    def get_tuned(kind):
        if kind not in tuned:
            tuned[kind] = tune(kind, data, plan, child_seed(seed, f"tune:{kind}"),
                               designs.get(kind), grids.get(kind))
        return tuned[kind]

    out = []
    for kind in learners:
        try:
            if kind == "superlearner":
                bases = [get_tuned(k)[0] for k in SL_BASES]
                sl_seed = child_seed(seed, "superlearner")
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RuntimeWarning)
                    point = fit_learner(LearnerSpec("superlearner",
                                                    {"bases": bases, "folds": folds}),
                                        data, seed=sl_seed)
                spec = LearnerSpec("superlearner",
                                   {"bases": bases, "weights": point.params["weights"]})
                cv = float(point.params["cv_auc"])
            else:
                spec, cv = get_tuned(kind)
                point = fit_learner(spec, data, seed=child_seed(seed, f"fit:{kind}"))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                boot = bootstrap_effect(data, spec, n_boot, boot_seed, point_model=point,
                                        workers=workers)
            out.append(MethodResult(kind, "ok", spec, boot, cv, notes=point.warnings))
        except _FIT_ERRORS as exc:
            log.info("%s failed: %s", kind, exc)
            out.append(MethodResult(kind, f"failed:{type(exc).__name__}", message=str(exc)))
    return out


def spec_summary(spec: LearnerSpec | None) -> dict:
    """Scalar hyperparameters of a spec, for record files."""
    if spec is None:
        return {}
    if spec.kind == "superlearner":
        return {"weights": [round(float(w), 12) for w in spec.params["weights"]],
                "bases": [dict(kind=b.kind, **spec_summary(b)) for b in spec.params["bases"]]}
    return {k: (float(v) if isinstance(v, (float, np.floating)) else v)
            for k, v in spec.params.items()}
