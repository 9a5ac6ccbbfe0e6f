"""Run configuration: a YAML/JSON mapping plus command-line overrides."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from .data import DesignConfig
from .learners import KINDS
from .simgen import SCENARIOS, ScenarioSpec

DEFAULT_LEARNERS = ("unadjusted", "lasso", "elasticnet")
GRID_KEYS = {"length", "alphas", "lambda_ratio", "hidden_sizes", "costs", "decay"}


class ConfigError(ValueError):
    """Invalid or incomplete run configuration (a usage error)."""


@dataclass(frozen=True)
class CellConfig:
    """One simulation cell: scenario, sample size and effect.

    The effect is given either as a calibrated marginal odds ratio label
    (``mor``) or directly as the arm coefficient (``beta``).
    """

    scenario: str
    n: int
    mor: float | None = None
    beta: float | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        if int(self.n) < 2:
            raise ConfigError("n must be >= 2")
        if (self.mor is None) == (self.beta is None):
            raise ConfigError("give exactly one of 'mor' and 'beta' per cell")

    def spec(self) -> ScenarioSpec:
        if self.mor is not None:
            try:
                return ScenarioSpec.from_mor(self.scenario, int(self.n), float(self.mor))
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        return ScenarioSpec(self.scenario, int(self.n), float(self.beta))


@dataclass(frozen=True)
class RunConfig:
    seed: int
    cells: tuple[CellConfig, ...] = ()
    reps: int = 100
    learners: tuple[str, ...] = DEFAULT_LEARNERS
    bootstrap: int | None = None
    folds: int = 20
    workers: int = 1
    out: str = "out"
    designs: dict = field(default_factory=dict)
    grids: dict = field(default_factory=dict)
    truth_reps: int = 200_000
    truth_n: int = 200

    def __post_init__(self):
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        for k in self.learners:
            if k not in KINDS:
                raise ConfigError(f"unknown learner {k!r}; choose from {KINDS}")
        if not self.learners:
            raise ConfigError("at least one learner is required")
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")
        if self.bootstrap is not None and self.bootstrap < 2:
            raise ConfigError("bootstrap must be >= 2")
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        for kind, d in self.designs.items():
            if kind not in KINDS:
                raise ConfigError(f"design override for unknown learner {kind!r}")
            if not isinstance(d, DesignConfig):
                raise ConfigError("design overrides must be DesignConfig objects")
        for kind, g in self.grids.items():
            if kind not in KINDS:
                raise ConfigError(f"grid override for unknown learner {kind!r}")
            bad = set(g) - GRID_KEYS
            if bad:
                raise ConfigError(f"unknown grid option(s) {sorted(bad)} for {kind}")

    def n_boot(self, default: int) -> int:
        return default if self.bootstrap is None else self.bootstrap

    def to_dict(self) -> dict:
        """Result-determining fields only (no output path or worker count)."""
        d = asdict(self)
        d.pop("workers")
        d.pop("out")
        d["cells"] = [{k: v for k, v in c.items() if v is not None} for c in d["cells"]]
        d["learners"] = list(self.learners)
        d["designs"] = {k: asdict(v) for k, v in sorted(self.designs.items())}
        d["grids"] = {k: dict(v) for k, v in sorted(self.grids.items())}
        return d


def _cell(obj) -> CellConfig:
    if not isinstance(obj, dict):
        raise ConfigError("each cell must be a mapping")
    unknown = set(obj) - {"scenario", "n", "mor", "beta"}
    if unknown:
        raise ConfigError(f"unknown cell key(s) {sorted(unknown)}")
    try:
        return CellConfig(obj["scenario"], int(obj["n"]), obj.get("mor"), obj.get("beta"))
    except KeyError as exc:
        raise ConfigError(f"cell is missing {exc}") from None


def load_mapping(path) -> dict:
    text = Path(path).read_text()
    try:
        data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def from_mapping(data: dict, overrides: dict | None = None) -> RunConfig:
    """Build a :class:`RunConfig` from a parsed config file and CLI overrides.

    Overrides with value ``None`` are ignored.  ``scenario``/``n``/``effect``
    overrides replace the cell list with a single cell.
    """
    data = dict(data)
    ov = {k: v for k, v in (overrides or {}).items() if v is not None}
    known = {"seed", "cells", "reps", "learners", "bootstrap", "folds", "workers", "out",
             "designs", "grids", "truth_reps", "truth_n"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config key(s) {sorted(unknown)}")
    cells = [_cell(c) for c in data.get("cells", [])]
    if {"scenario", "n", "effect"} & set(ov):
        base = cells[0] if cells else None
        scenario = ov.get("scenario", base.scenario if base else None)
        n = ov.get("n", base.n if base else None)
        if scenario is None or n is None:
            raise ConfigError("--scenario and --n are both needed without a config cell")
        if "effect" in ov:
            cells = [CellConfig(scenario, int(n), mor=float(ov["effect"]))]
        elif base is not None:
            cells = [CellConfig(scenario, int(n), base.mor, base.beta)]
        else:
            raise ConfigError("--effect is needed without a config cell")
    seed = ov.get("seed", data.get("seed"))
    if seed is None:
        raise ConfigError("a seed is required (--seed or 'seed' in the config)")
    learners = ov.get("learners", data.get("learners", list(DEFAULT_LEARNERS)))
    if isinstance(learners, str):
        learners = [s.strip() for s in learners.split(",") if s.strip()]
    designs = {}
    for kind, d in (data.get("designs") or {}).items():
        try:
            designs[kind] = DesignConfig(**d)
        except TypeError as exc:
            raise ConfigError(f"design override for {kind}: {exc}") from None
    try:
        return RunConfig(
            seed=int(seed), cells=tuple(cells),
            reps=int(ov.get("reps", data.get("reps", 100))),
            learners=tuple(learners),
            bootstrap=ov.get("bootstrap", data.get("bootstrap")),
            folds=int(data.get("folds", 20)),
            workers=int(ov.get("workers", data.get("workers", 1))),
            out=str(ov.get("out", data.get("out", "out"))),
            designs=designs, grids=dict(data.get("grids") or {}),
            truth_reps=int(ov.get("truth_reps", data.get("truth_reps", 200_000))),
            truth_n=int(ov.get("truth_n", data.get("truth_n", 200))))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def load(path=None, overrides: dict | None = None) -> RunConfig:
    return from_mapping(load_mapping(path) if path else {}, overrides)


def format_float(v) -> str:
    """Round-trip text for a float (``repr``), with ``nan`` for missing."""
    if v is None:
        return ""
    v = float(v)
    return "nan" if math.isnan(v) else repr(v)
