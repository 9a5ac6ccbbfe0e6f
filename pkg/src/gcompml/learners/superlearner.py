"""Convex-weighted ensemble of base learners with AUC-optimal weights."""

from __future__ import annotations

import itertools
import warnings

import numpy as np
from scipy.optimize import minimize

from ..data import TrialDataset
from ..errors import DegenerateOutcome, GCompError
from ..rng import child_seed, stream
from ..tuning import FoldPlan, make_folds
from . import FittedOutcomeModel, LearnerSpec, fit_learner

GRID_STEP = 0.01
N_RESTARTS = 5


class PairwiseCVAUC:
    """Mean per-fold AUC of ``P @ w`` for arbitrary weight vectors.

    The (case, control) pairs of every evaluable fold are enumerated once, so
    each evaluation is a single vectorized comparison.
    """

    def __init__(self, preds: np.ndarray, y: np.ndarray, plan: FoldPlan):
        self.preds = np.asarray(preds, dtype=float)
        cases, controls, weights = [], [], []
        n_eval = 0
        for f in range(plan.k):
            idx = np.flatnonzero(plan.folds == f)
            pos = idx[y[idx] == 1]
            neg = idx[y[idx] != 1]
            if len(pos) == 0 or len(neg) == 0:
                continue
            n_eval += 1
            ci, cj = np.meshgrid(pos, neg, indexing="ij")
            cases.append(ci.ravel())
            controls.append(cj.ravel())
            weights.append(np.full(ci.size, 1.0 / ci.size))
        self.n_eval = n_eval
        if n_eval:
            self.cases = np.concatenate(cases)
            self.controls = np.concatenate(controls)
            self.weights = np.concatenate(weights) / n_eval

    def __call__(self, w: np.ndarray) -> float:
        if self.n_eval == 0:
            return 0.5
        s = self.preds @ np.asarray(w, dtype=float)
        d = s[self.cases] - s[self.controls]
        return float(self.weights @ ((d > 0) + 0.5 * (d == 0)))

    def many(self, ws: np.ndarray) -> np.ndarray:
        if self.n_eval == 0:
            return np.full(len(ws), 0.5)
        s = self.preds @ ws.T
        d = s[self.cases] - s[self.controls]
        return self.weights @ ((d > 0) + 0.5 * (d == 0))


def simplex_grid(k: int, step: float = GRID_STEP) -> np.ndarray:
    m = int(round(1.0 / step))
    pts = [c for c in itertools.product(range(m + 1), repeat=k - 1) if sum(c) <= m]
    return np.array([[*c, m - sum(c)] for c in pts], dtype=float) / m


def _softmax(theta):
    t = np.concatenate([theta, [0.0]])
    t = t - t.max()
    e = np.exp(t)
    return e / e.sum()


def optimize_weights(preds: np.ndarray, y: np.ndarray, plan: FoldPlan, seed: int = 0,
                     usable=None) -> tuple[np.ndarray, float]:
    """Simplex weights maximizing mean per-fold AUC of the weighted prediction.

    Pure learners are tried first, so ties resolve toward them; three or
    fewer learners are searched on a 0.01 simplex grid, more by softmax
    Nelder-Mead from several seeded starts.
    """
    n_base = preds.shape[1]
    usable = np.ones(n_base, dtype=bool) if usable is None else np.asarray(usable, dtype=bool)
    cols = np.flatnonzero(usable)
    if len(cols) == 0:
        raise GCompError("no usable base learner")
    auc = PairwiseCVAUC(preds[:, cols], y, plan)
    k = len(cols)
    cands = [np.eye(k)[i] for i in range(k)]
    if k <= 3:
        cands.extend(simplex_grid(k))
        cand = np.array(cands)
        scores = auc.many(cand)
    else:
        cands.append(np.full(k, 1.0 / k))
        rng = stream(seed, "sl-weights")

        def loss(theta):
            return -auc(_softmax(theta))

        for _ in range(N_RESTARTS):
            start = rng.normal(0.0, 1.0, size=k - 1)
            res = minimize(loss, start, method="Nelder-Mead",
                           options={"maxfev": 200 * k, "xatol": 1e-4, "fatol": 1e-10})
            cands.append(_softmax(res.x))
        cand = np.array(cands)
        scores = auc.many(cand)
    best = 0
    for i in range(1, len(scores)):
        if scores[i] > scores[best] + 1e-12:
            best = i
    w = np.zeros(n_base)
    w[cols] = cand[best]
    w = np.clip(w, 0.0, None)
    return w / w.sum(), float(scores[best])


def fit_super_learner(data: TrialDataset, base_specs, folds: int = 20, seed: int = 0,
                      weights=None) -> FittedOutcomeModel:
    """Cross-validated ensemble of ``base_specs`` (each a :class:`LearnerSpec`).

    With ``weights`` given, the cross-validation step is skipped and only the
    base learners are refitted; bootstrap replicates use this so that the
    ensemble weights stay fixed at their full-data values.
    """
    specs = [s if isinstance(s, LearnerSpec) else LearnerSpec(**s) for s in base_specs]
    if len(specs) < 2:
        raise ValueError("a super learner needs at least two base learners")
    if np.all(data.y == data.y[0]):
        raise DegenerateOutcome("outcome is constant")
    if weights is not None:
        return _refit_fixed(data, specs, np.asarray(weights, dtype=float), seed)
    plan = make_folds(data.n, min(folds, data.n), data.y, child_seed(seed, "sl-folds"))
    n_base = len(specs)
    oof = np.zeros((data.n, n_base))
    usable = np.ones(n_base, dtype=bool)
    notes = []
    for f in range(plan.k):
        train_idx, test_idx = plan.split(f)
        if len(test_idx) == 0:
            continue
        train = data.subset(train_idx)
        for b, spec in enumerate(specs):
            if not usable[b]:
                continue
            try:
                m = fit_learner(spec, train, seed=child_seed(seed, "sl-fit", f, b))
                oof[test_idx, b] = m.predict(data.a[test_idx], data.x[test_idx])
            except (GCompError, ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
                usable[b] = False
                notes.append(f"base {spec.kind} failed on fold {f}: {exc}")
    if notes:
        warnings.warn("; ".join(notes) + " (weight set to 0)", RuntimeWarning, stacklevel=2)
    weights, score = optimize_weights(oof, data.y, plan, seed=seed, usable=usable)
    models = []
    for b, spec in enumerate(specs):
        if not usable[b]:
            models.append(None)
            continue
        try:
            models.append(fit_learner(spec, data, seed=child_seed(seed, "sl-full", b)))
        except (GCompError, ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
            models.append(None)
            notes.append(f"base {spec.kind} failed on full data: {exc}")
            weights[b] = 0.0
    if weights.sum() <= 0:
        raise GCompError("super learner has no fitted base learner")
    weights = weights / weights.sum()
    return FittedOutcomeModel("superlearner",
                              {"weights": weights, "models": models, "bases": specs,
                               "cv_auc": score, "oof": oof, "folds": plan.k},
                              None, tuple(notes))


def _refit_fixed(data: TrialDataset, specs, weights: np.ndarray, seed: int) -> FittedOutcomeModel:
    if weights.shape != (len(specs),) or np.any(weights < 0) or weights.sum() <= 0:
        raise ValueError("weights must be a nonnegative vector with one entry per base learner")
    weights = weights / weights.sum()
    models = [fit_learner(spec, data, seed=child_seed(seed, "sl-full", b)) if w > 0 else None
              for b, (spec, w) in enumerate(zip(specs, weights))]
    return FittedOutcomeModel("superlearner",
                              {"weights": weights, "models": models, "bases": specs,
                               "cv_auc": float("nan"), "folds": 0}, None)
