"""Outcome-model learners Q(Y | A, X).

Every learner is fitted through :func:`fit_learner`, which builds the
learner's design matrix and returns a :class:`FittedOutcomeModel`.  A fitted
model predicts event probabilities for raw covariate rows with the arm forced
to a chosen value (:func:`predict_proba`).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.special import expit

from ..data import (DesignConfig, DesignMatrix, DesignTransform, TrialDataset, build_design,
                    design_from_dict, design_to_dict)
from ..errors import DataError, DegenerateOutcome
from ..rng import stream
from . import elasticnet, logistic, neuralnet, svm

KINDS = ("unadjusted", "logistic", "lasso", "elasticnet", "neuralnet", "svm_rbf", "superlearner")
FORMAT_VERSION = 1
PROBA_CLIP = 1e-12
DEFAULT_DECAY = 0.01


def default_design(kind: str) -> DesignConfig:
    if kind == "unadjusted":
        return DesignConfig.arm_only()
    if kind in ("lasso", "elasticnet"):
        return DesignConfig()
    return DesignConfig.plain()


@dataclass(frozen=True)
class ElasticnetSpec:
    alpha: float
    lam: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")


@dataclass(frozen=True)
class LearnerSpec:
    """A learner kind with fixed hyperparameters and its design recipe."""

    kind: str
    params: dict = field(default_factory=dict)
    design: DesignConfig | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown learner kind {self.kind!r}")
        if self.design is None:
            object.__setattr__(self, "design", default_design(self.kind))


@dataclass(frozen=True)
class FittedOutcomeModel:
    kind: str
    params: dict
    transform: DesignTransform | None
    warnings: tuple[str, ...] = ()

    def predict_design(self, z: np.ndarray) -> np.ndarray:
        k = self.kind
        if k in ("unadjusted", "logistic", "lasso", "elasticnet"):
            p = expit(self.params["intercept"] + z @ self.params["coef"])
        elif k == "neuralnet":
            p = neuralnet.predict(self.params, z)
        elif k == "svm_rbf":
            p = svm.predict(self.params, z)
        else:
            raise TypeError(f"{k} models predict from covariates, not a design matrix")
        return np.clip(p, PROBA_CLIP, 1 - PROBA_CLIP)

    def predict(self, a_forced, x) -> np.ndarray:
        """Probabilities for covariate rows ``x`` (2-D) with arm ``a_forced``."""
        x = np.asarray(x, dtype=float)
        if self.kind == "superlearner":
            out = np.zeros(x.shape[0])
            for w, sub in zip(self.params["weights"], self.params["models"]):
                if w > 0 and sub is not None:
                    out += w * sub.predict(a_forced, x)
            return np.clip(out, PROBA_CLIP, 1 - PROBA_CLIP)
        return self.predict_design(self.transform.apply(a_forced, x))


def predict_proba(model: FittedOutcomeModel, a_forced, x_row):
    """Predicted P(Y=1 | A=a_forced, X=x_row); a scalar for a single row."""
    x = np.asarray(x_row, dtype=float)
    if x.ndim == 1:
        expected = _n_covariates(model)
        if x.shape[0] != expected:
            raise DataError(f"expected {expected} covariates, got {x.shape[0]}")
        return float(model.predict(a_forced, x.reshape(1, -1))[0])
    return model.predict(a_forced, x)


def _n_covariates(model: FittedOutcomeModel) -> int:
    if model.kind == "superlearner":
        return next(m for m in model.params["models"] if m is not None).transform.n_covariates
    return model.transform.n_covariates


# --------------------------------------------------------------------------
# fitting on a design matrix


def fit_logistic(design: DesignMatrix, y, kind: str = "logistic") -> FittedOutcomeModel:
    b0, coef, n_iter, converged, separated = logistic.irls(design.z, y)
    notes = []
    if separated:
        notes.append("separation")
    if not converged:
        notes.append("not converged")
    return FittedOutcomeModel(kind, {"intercept": b0, "coef": coef, "n_iter": n_iter,
                                     "converged": converged, "separated": separated},
                              design.transform, tuple(notes))


def fit_elasticnet(design: DesignMatrix, y, spec: ElasticnetSpec,
                   kind: str = "elasticnet") -> FittedOutcomeModel:
    y = np.asarray(y, dtype=float)
    if np.all(y == y[0]):
        raise DegenerateOutcome("outcome is constant")
    notes = []
    if not _looks_standardized(design.z):
        warnings.warn("elastic net fitted on unstandardized columns", RuntimeWarning, stacklevel=2)
        notes.append("unstandardized")
    b0, coef, converged = elasticnet.enet_fit(design.z, y, spec.lam, spec.alpha)
    if not converged:
        notes.append("not converged")
    return FittedOutcomeModel(kind, {"intercept": b0, "coef": coef, "alpha": spec.alpha,
                                     "lambda": spec.lam, "converged": converged},
                              design.transform, tuple(notes))


def _looks_standardized(z: np.ndarray) -> bool:
    if z.shape[1] == 0:
        return True
    sd = z.std(axis=0)
    ok = (np.abs(z.mean(axis=0)) < 1e-8) & ((np.abs(sd - 1) < 1e-8) | (sd < 1e-12))
    return bool(np.all(ok))


def fit_neural_net(design: DesignMatrix, y, hidden_size: int, decay: float = DEFAULT_DECAY,
                   seed: int = 0) -> FittedOutcomeModel:
    y = np.asarray(y, dtype=float)
    if np.all(y == y[0]):
        raise DegenerateOutcome("outcome is constant")
    res = neuralnet.train(design.z, y, int(hidden_size), float(decay),
                          stream(seed, "nn-init"))
    res.update(hidden_size=int(hidden_size), decay=float(decay))
    notes = () if res["converged"] else ("not converged",)
    return FittedOutcomeModel("neuralnet", res, design.transform, notes)


def fit_svm_rbf(design: DesignMatrix, y, cost: float, gamma: float) -> FittedOutcomeModel:
    res = svm.train(design.z, y, float(cost), float(gamma))
    notes = () if res["converged"] else ("not converged",)
    return FittedOutcomeModel("svm_rbf", res, design.transform, notes)


# --------------------------------------------------------------------------
# fitting from a dataset


def fit_learner(spec: LearnerSpec, data: TrialDataset, seed: int = 0) -> FittedOutcomeModel:
    """Build the learner's design on ``data`` and fit it with ``spec.params``."""
    kind, params = spec.kind, spec.params
    if kind == "superlearner":
        from .superlearner import fit_super_learner
        return fit_super_learner(data, params["bases"], folds=params.get("folds", 20), seed=seed,
                                 weights=params.get("weights"))
    if np.all(data.y == data.y[0]):
        raise DegenerateOutcome("outcome is constant")
    design = build_design(data, spec.design)
    if kind in ("unadjusted", "logistic"):
        return fit_logistic(design, data.y, kind=kind)
    if kind == "lasso":
        return fit_elasticnet(design, data.y, ElasticnetSpec(1.0, float(params["lambda"])),
                              kind="lasso")
    if kind == "elasticnet":
        return fit_elasticnet(design, data.y,
                              ElasticnetSpec(float(params["alpha"]), float(params["lambda"])))
    if kind == "neuralnet":
        return fit_neural_net(design, data.y, params["hidden_size"],
                              params.get("decay", DEFAULT_DECAY), seed)
    if kind == "svm_rbf":
        gamma = params.get("gamma")
        if gamma is None:
            gamma = svm.median_gamma(design.z)
        return fit_svm_rbf(design, data.y, params["cost"], gamma)
    raise ValueError(f"unknown learner kind {kind!r}")


# --------------------------------------------------------------------------
# serialization


def _encode(v: Any):
    if isinstance(v, np.ndarray):
        return {"__array__": v.tolist(), "shape": list(v.shape)}
    if isinstance(v, FittedOutcomeModel):
        return model_to_dict(v)
    if isinstance(v, LearnerSpec):
        return spec_to_dict(v)
    if isinstance(v, (list, tuple)):
        return [_encode(x) for x in v]
    if isinstance(v, dict):
        return {k: _encode(x) for k, x in v.items()}
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    return v


def _decode(v: Any):
    if isinstance(v, dict):
        if "__array__" in v:
            return np.asarray(v["__array__"], dtype=float).reshape(v["shape"])
        if "format_version" in v and "kind" in v and "params" in v:
            return model_from_dict(v)
        if "learner" in v:
            return spec_from_dict(v)
        return {k: _decode(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_decode(x) for x in v]
    return v


def spec_to_dict(spec: LearnerSpec) -> dict:
    return {"learner": spec.kind, "params": _encode(spec.params),
            "design": None if spec.design is None else spec.design.__dict__.copy()}


def spec_from_dict(d: dict) -> LearnerSpec:
    design = None if d.get("design") is None else DesignConfig(**d["design"])
    return LearnerSpec(d["learner"], _decode(d.get("params", {})), design)


def model_to_dict(model: FittedOutcomeModel) -> dict:
    return {"format_version": FORMAT_VERSION, "kind": model.kind,
            "params": _encode(model.params),
            "transform": None if model.transform is None else design_to_dict(model.transform),
            "warnings": list(model.warnings)}


def model_from_dict(d: dict) -> FittedOutcomeModel:
    if d.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {d.get('format_version')!r}")
    transform = None if d["transform"] is None else design_from_dict(d["transform"])
    return FittedOutcomeModel(d["kind"], _decode(d["params"]), transform, tuple(d["warnings"]))


def dumps(model: FittedOutcomeModel) -> str:
    return json.dumps(model_to_dict(model), sort_keys=True)


def loads(text: str) -> FittedOutcomeModel:
    return model_from_dict(json.loads(text))


__all__ = [
    "KINDS", "ElasticnetSpec", "FittedOutcomeModel", "LearnerSpec", "default_design",
    "fit_elasticnet", "fit_learner", "fit_logistic", "fit_neural_net", "fit_svm_rbf",
    "predict_proba", "dumps", "loads", "model_to_dict", "model_from_dict",
]
