"""Cross-validation, AUC and hyperparameter grid search.

Candidates are scored by the mean over folds of the held-out AUC.  Folds
without both outcome classes have no AUC and are left out of the mean; a
fold on which a learner fails counts as AUC 0.5.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit
from scipy.stats import rankdata

from .data import DesignConfig, TrialDataset, build_design
from .errors import GCompError
from .rng import child_seed, stream

log = logging.getLogger(__name__)

GRID_LENGTH = 20
TIE_TOL = 1e-12


def compute_auc(scores, labels) -> float:
    """Concordance of ``scores`` with binary ``labels`` (ties count one half)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = labels == 1
    n1 = int(pos.sum())
    n0 = len(labels) - n1
    if n1 == 0 or n0 == 0:
        raise ValueError("AUC needs at least one label of each class")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n0))


@dataclass(frozen=True)
class FoldPlan:
    folds: np.ndarray
    k: int
    seed: int
    zero_event_folds: tuple[int, ...] = ()

    def split(self, fold: int):
        test = np.flatnonzero(self.folds == fold)
        train = np.flatnonzero(self.folds != fold)
        return train, test

    def sizes(self) -> np.ndarray:
        return np.bincount(self.folds, minlength=self.k)


def make_folds(n: int, k: int, y, seed: int) -> FoldPlan:
    """Outcome-stratified assignment of ``n`` rows to ``k`` folds."""
    y = np.asarray(y)
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= K <= n, got K={k}, n={n}")
    if len(y) != n:
        raise ValueError("y must have length n")
    rng = stream(seed, "folds", n, k)
    folds = np.empty(n, dtype=np.intp)
    cases = np.flatnonzero(y == 1)
    controls = np.flatnonzero(y != 1)
    cases = cases[rng.permutation(len(cases))]
    controls = controls[rng.permutation(len(controls))]
    folds[cases] = np.arange(len(cases)) % k
    folds[controls] = (len(cases) + np.arange(len(controls))) % k
    events = np.bincount(folds[cases], minlength=k)
    empty = tuple(int(f) for f in np.flatnonzero(events == 0))
    if empty and len(cases):
        log.debug("fold plan has %d folds without events", len(empty))
    return FoldPlan(folds, k, seed, empty)


def fold_aucs(pred: np.ndarray, y: np.ndarray, plan: FoldPlan) -> np.ndarray:
    """Held-out AUC per fold; NaN where the fold lacks one of the classes."""
    out = np.full(plan.k, np.nan)
    for f in range(plan.k):
        idx = plan.folds == f
        yf = y[idx]
        if 0 < yf.sum() < len(yf):
            out[f] = compute_auc(pred[idx], yf)
    return out


def mean_cv_auc(aucs: np.ndarray) -> float:
    if np.all(np.isnan(aucs)):
        return 0.5
    return float(np.nanmean(aucs))


def cv_auc(pred, y, plan: FoldPlan) -> float:
    """Mean held-out AUC over the folds that contain both classes."""
    return mean_cv_auc(fold_aucs(np.asarray(pred, dtype=float), np.asarray(y), plan))


# --------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class TuningGrid:
    """Candidate hyperparameter sets for one learner.

    ``reg_keys`` order candidates from most to least regularized (smaller is
    more regularized) and break ties in mean CV AUC.
    """

    kind: str
    candidates: tuple[dict, ...]
    design: DesignConfig | None = None
    reg_keys: tuple[tuple, ...] = ()

    def __post_init__(self):
        if not self.candidates:
            raise ValueError("empty tuning grid")
        if not self.reg_keys:
            object.__setattr__(self, "reg_keys", tuple(reg_key(self.kind, c)
                                                       for c in self.candidates))


def reg_key(kind: str, params: dict) -> tuple:
    if kind in ("lasso", "elasticnet"):
        return (-float(params["lambda"]),)
    if kind == "neuralnet":
        return (int(params["hidden_size"]),)
    if kind == "svm_rbf":
        return (float(params["cost"]),)
    return ()


def _log_lambdas(lmax: float, length: int, ratio: float) -> list[float]:
    if not np.isfinite(lmax) or lmax <= 0:
        lmax = 1e-3
    return [float(v) for v in lmax * np.logspace(0.0, np.log10(ratio), length)]


def default_grid(kind: str, data: TrialDataset, design: DesignConfig | None = None,
                 length: int = GRID_LENGTH, *, alphas=None, lambda_ratio: float = 1e-4,
                 hidden_sizes=None, costs=None, decay: float | None = None) -> TuningGrid:
    """Default candidate set for ``kind`` computed on the full dataset."""
    from .learners import DEFAULT_DECAY, default_design
    from .learners import elasticnet, svm

    design = design or default_design(kind)
    if kind in ("lasso", "elasticnet"):
        z = build_design(data, design).z
        if kind == "lasso":
            alphas = [1.0]
        elif alphas is None:
            alphas = [round(0.1 * i, 10) for i in range(1, 11)]
        cands = []
        for a in alphas:
            lams = _log_lambdas(elasticnet.lambda_max(z, data.y, a), length, lambda_ratio)
            for lam in lams:
                cands.append({"lambda": lam} if kind == "lasso" else {"alpha": float(a), "lambda": lam})
        return TuningGrid(kind, tuple(cands), design)
    if kind == "neuralnet":
        sizes = hidden_sizes if hidden_sizes is not None else range(1, length + 1)
        d = DEFAULT_DECAY if decay is None else decay
        return TuningGrid(kind, tuple({"hidden_size": int(h), "decay": float(d)} for h in sizes),
                          design)
    if kind == "svm_rbf":
        z = build_design(data, design).z
        gamma = svm.median_gamma(z)
        costs = costs if costs is not None else [2.0 ** e for e in range(-5, -5 + length)]
        return TuningGrid(kind, tuple({"cost": float(c), "gamma": gamma} for c in costs), design)
    raise ValueError(f"learner {kind!r} has no tuning grid")


# --------------------------------------------------------------------------
# search


@dataclass(frozen=True)
class GridResult:
    best: dict
    best_index: int
    mean_auc: np.ndarray
    fold_auc: np.ndarray
    plan: FoldPlan
    n_failures: int = 0
    warnings: tuple[str, ...] = field(default=())

    def table(self, grid: TuningGrid) -> list[dict]:
        return [dict(c, mean_cv_auc=float(m)) for c, m in zip(grid.candidates, self.mean_auc)]


def select_best(mean_auc: np.ndarray, reg_keys) -> int:
    top = np.nanmax(mean_auc)
    tied = [i for i, m in enumerate(mean_auc) if m >= top - TIE_TOL]
    return min(tied, key=lambda i: (reg_keys[i], i))


def grid_search(data: TrialDataset, grid: TuningGrid, k: int = 20, seed: int = 0,
                plan: FoldPlan | None = None) -> GridResult:
    """Pick the candidate with the largest mean held-out AUC over ``k`` folds."""
    from .learners import PROBA_CLIP, LearnerSpec, elasticnet, fit_learner

    plan = plan or make_folds(data.n, k, data.y, seed)
    n_cand = len(grid.candidates)
    fold_auc = np.full((n_cand, plan.k), np.nan)
    failures = 0
    notes = []
    penalized = grid.kind in ("lasso", "elasticnet")
    for f in range(plan.k):
        train_idx, test_idx = plan.split(f)
        train = data.subset(train_idx)
        y_test = data.y[test_idx]
        evaluable = 0 < y_test.sum() < len(y_test)
        if not evaluable:
            continue  # fold has no AUC for any candidate
        preds = np.full((n_cand, len(test_idx)), np.nan)
        if penalized:
            try:
                if np.all(train.y == train.y[0]):
                    raise GCompError("constant outcome in training fold")
                dm = build_design(train, grid.design)
                z_test = dm.transform.apply(data.a[test_idx], data.x[test_idx])
                by_alpha: dict[float, list[int]] = {}
                for c, cand in enumerate(grid.candidates):
                    by_alpha.setdefault(float(cand.get("alpha", 1.0)), []).append(c)
                for a, idx in by_alpha.items():
                    lams = [grid.candidates[c]["lambda"] for c in idx]
                    b0s, coefs = elasticnet.enet_path(dm.z, train.y, a, lams)
                    for row, c in enumerate(idx):
                        eta = b0s[row] + z_test @ coefs[row]
                        preds[c] = np.clip(expit(eta), PROBA_CLIP, 1 - PROBA_CLIP)
            except (GCompError, ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
                failures += n_cand
                notes.append(f"fold {f}: {exc}")
        else:
            fold_seed = child_seed(seed, "cv-fit", f)
            for c, cand in enumerate(grid.candidates):
                try:
                    model = fit_learner(LearnerSpec(grid.kind, cand, grid.design), train,
                                        seed=fold_seed)
                    preds[c] = model.predict(data.a[test_idx], data.x[test_idx])
                except (GCompError, ValueError, FloatingPointError,
                        np.linalg.LinAlgError) as exc:
                    failures += 1
                    notes.append(f"fold {f} candidate {c}: {exc}")
        for c in range(n_cand):
            if np.any(np.isnan(preds[c])):
                fold_auc[c, f] = 0.5
            else:
                fold_auc[c, f] = compute_auc(preds[c], y_test)
    if failures:
        warnings.warn(f"{failures} fold fits failed during tuning of {grid.kind}; "
                      "scored as AUC 0.5", RuntimeWarning, stacklevel=2)
    mean_auc = np.array([mean_cv_auc(fold_auc[c]) for c in range(n_cand)])
    best = select_best(mean_auc, grid.reg_keys)
    return GridResult(dict(grid.candidates[best]), best, mean_auc, fold_auc, plan, failures,
                      tuple(notes))
