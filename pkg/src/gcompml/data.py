"""Trial datasets and design matrices.

A :class:`TrialDataset` holds the observed triplets (y, a, x).  A
:class:`DesignConfig` says how covariates are expanded (B-spline bases for
continuous covariates, arm interactions, standardization) and
:func:`build_design` turns a dataset into a :class:`DesignMatrix` whose
:class:`DesignTransform` can be re-applied to new rows with the arm forced to
0 or 1, which is what counterfactual prediction needs.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from .errors import DataError

CONTINUOUS = "continuous"
BINARY = "binary"

_MISSING_TOKENS = {"", "na", "nan", "null", "none", "."}


# --------------------------------------------------------------------------
# datasets


@dataclass(frozen=True)
class TrialDataset:
    y: np.ndarray
    a: np.ndarray
    x: np.ndarray
    column_kinds: tuple[str, ...]
    column_names: tuple[str, ...]

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        a = np.asarray(self.a, dtype=float).ravel()
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1) if x.size else x.reshape(len(y), 0)
        n = len(y)
        if n < 2:
            raise DataError(f"need at least 2 rows, got {n}")
        if len(a) != n or x.shape[0] != n:
            raise DataError(f"length mismatch: y={n}, a={len(a)}, x rows={x.shape[0]}")
        if not np.all(np.isin(y, (0.0, 1.0))):
            raise DataError("y must contain only 0/1")
        if not np.all(np.isin(a, (0.0, 1.0))):
            raise DataError("a must contain only 0/1")
        if not np.all(np.isfinite(x)):
            raise DataError("covariates contain missing or non-finite values")
        kinds = tuple(self.column_kinds)
        names = tuple(self.column_names)
        if len(kinds) != x.shape[1] or len(names) != x.shape[1]:
            raise DataError("column_kinds/column_names must match the number of covariates")
        for j, kind in enumerate(kinds):
            if kind not in (CONTINUOUS, BINARY):
                raise DataError(f"unknown column kind {kind!r}")
            if kind == BINARY and not np.all(np.isin(x[:, j], (0.0, 1.0))):
                raise DataError(f"binary column {names[j]!r} has values outside {{0,1}}")
        for arr in (y, a, x):
            arr.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "column_kinds", kinds)
        object.__setattr__(self, "column_names", names)

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def subset(self, index) -> "TrialDataset":
        index = np.asarray(index, dtype=np.intp)
        return TrialDataset(self.y[index], self.a[index], self.x[index],
                            self.column_kinds, self.column_names)

    def arm_only(self) -> "TrialDataset":
        return TrialDataset(self.y, self.a, np.empty((self.n, 0)), (), ())


def infer_kind(values: np.ndarray) -> str:
    return BINARY if np.all(np.isin(values, (0.0, 1.0))) else CONTINUOUS


def read_schema(path) -> dict[str, str]:
    """Read a sidecar schema (YAML or JSON mapping of column name to kind)."""
    text = Path(path).read_text()
    schema = yaml.safe_load(text) or {}
    if not isinstance(schema, dict):
        raise DataError(f"schema {path} must map column names to kinds")
    return {str(k): str(v) for k, v in schema.items()}


def read_csv(path, schema: dict[str, str] | str | Path | None = None) -> TrialDataset:
    """Load a dataset from CSV with columns ``y``, ``a`` and covariates.

    Column kinds are inferred from the value set unless ``schema`` (a mapping
    or a path to a sidecar file) overrides them.
    """
    if schema is not None and not isinstance(schema, dict):
        schema = read_schema(schema)
    schema = schema or {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        rows = [row for row in reader if row]
    if "y" not in header or "a" not in header:
        raise DataError("CSV must have columns named 'y' and 'a'")
    if len(set(header)) != len(header):
        raise DataError("duplicate column names in CSV header")
    values = np.empty((len(rows), len(header)))
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"row {i + 2} has {len(row)} fields, expected {len(header)}")
        for j, cell in enumerate(row):
            cell = cell.strip()
            if cell.lower() in _MISSING_TOKENS:
                raise DataError(
                    f"missing value in column {header[j]!r}, row {i + 2}; "
                    "preprocess to complete cases before analysis")
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise DataError(f"non-numeric value {cell!r} in column {header[j]!r}") from None
    cov_names = [h for h in header if h not in ("y", "a")]
    unknown = set(schema) - set(cov_names)
    if unknown:
        raise DataError(f"schema names unknown columns: {sorted(unknown)}")
    cov_idx = [header.index(h) for h in cov_names]
    x = values[:, cov_idx] if cov_idx else np.empty((len(rows), 0))
    kinds = tuple(schema.get(name, infer_kind(x[:, j])) for j, name in enumerate(cov_names))
    return TrialDataset(values[:, header.index("y")], values[:, header.index("a")],
                        x, kinds, tuple(cov_names))


def _fmt(v: float) -> str:
    return repr(float(v)) if not float(v).is_integer() else str(int(v))


def write_csv(data: TrialDataset, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y", "a", *data.column_names])
        for i in range(data.n):
            w.writerow([_fmt(data.y[i]), _fmt(data.a[i]), *(_fmt(v) for v in data.x[i])])


def write_schema(data: TrialDataset, path) -> None:
    Path(path).write_text(json.dumps(dict(zip(data.column_names, data.column_kinds)), indent=2) + "\n")


# --------------------------------------------------------------------------
# B-splines


@dataclass(frozen=True)
class SplineKnots:
    """Boundary and interior knots of one clamped B-spline basis."""

    degree: int
    lower: float
    upper: float
    interior: tuple[float, ...]

    @property
    def n_basis(self) -> int:
        return self.degree + 1 + len(self.interior)

    def knot_vector(self) -> np.ndarray:
        d = self.degree
        return np.array([self.lower] * (d + 1) + list(self.interior) + [self.upper] * (d + 1))

    def evaluate(self, v) -> np.ndarray:
        return _cox_de_boor(np.asarray(v, dtype=float), self)


def _cox_de_boor(v: np.ndarray, knots: SplineKnots) -> np.ndarray:
    v = np.atleast_1d(v).ravel()
    d = knots.degree
    nb = knots.n_basis
    if not (knots.upper > knots.lower):
        out = np.zeros((len(v), nb))
        out[:, 0] = 1.0
        return out
    t = knots.knot_vector()
    v = np.clip(v, knots.lower, knots.upper)
    m = len(t)
    b = np.zeros((len(v), m - 1))
    for i in range(m - 1):
        if t[i] < t[i + 1]:
            b[:, i] = (t[i] <= v) & (v < t[i + 1])
    # right boundary belongs to the last non-empty interval
    last = max(i for i in range(m - 1) if t[i] < t[i + 1])
    b[v == knots.upper, :] = 0.0
    b[v == knots.upper, last] = 1.0
    for k in range(1, d + 1):
        nxt = np.zeros((len(v), m - 1 - k))
        for i in range(m - 1 - k):
            left_den = t[i + k] - t[i]
            right_den = t[i + k + 1] - t[i + 1]
            term = np.zeros(len(v))
            if left_den > 0:
                term = term + (v - t[i]) / left_den * b[:, i]
            if right_den > 0:
                term = term + (t[i + k + 1] - v) / right_den * b[:, i + 1]
            nxt[:, i] = term
        b = nxt
    return b[:, :nb]


def bspline_basis(v, degree: int, interior_knots: Sequence[float] = ()) -> tuple[np.ndarray, SplineKnots]:
    """Clamped B-spline basis of ``v`` with boundary knots at min/max of ``v``.

    Returns the ``len(v) x (degree + 1 + len(interior_knots))`` basis matrix
    and the knot record needed to evaluate the same basis at new points
    (values outside the boundary are clamped to it).
    """
    v = np.asarray(v, dtype=float).ravel()
    if degree < 1:
        raise ValueError("spline degree must be >= 1")
    if v.size == 0 or not np.all(np.isfinite(v)):
        raise ValueError("spline input must be non-empty and finite")
    interior = tuple(float(k) for k in interior_knots)
    lo, hi = float(v.min()), float(v.max())
    if any(b <= a for a, b in zip(interior, interior[1:])):
        raise ValueError("interior knots must be strictly increasing")
    if interior and (interior[0] <= lo or interior[-1] >= hi):
        raise ValueError("interior knots must lie strictly inside the observed range")
    knots = SplineKnots(degree, lo, hi, interior)
    return knots.evaluate(v), knots


def quantile_knots(v: np.ndarray, n_interior: int) -> tuple[float, ...]:
    if n_interior == 0:
        return ()
    probs = np.arange(1, n_interior + 1) / (n_interior + 1)
    return tuple(float(q) for q in np.quantile(v, probs))


# --------------------------------------------------------------------------
# design matrices


@dataclass(frozen=True)
class DesignConfig:
    use_splines: bool = True
    spline_degree: int = 3
    n_interior_knots: int = 3
    use_treatment_interactions: bool = True
    standardize: bool = True
    use_covariates: bool = True

    def __post_init__(self):
        if self.spline_degree < 1:
            raise ValueError("spline_degree must be >= 1")
        if self.n_interior_knots < 0:
            raise ValueError("n_interior_knots must be >= 0")

    @classmethod
    def plain(cls) -> "DesignConfig":
        """Main effects and arm only, standardized."""
        return cls(use_splines=False, use_treatment_interactions=False)

    @classmethod
    def arm_only(cls) -> "DesignConfig":
        return cls(use_splines=False, use_treatment_interactions=False,
                   standardize=False, use_covariates=False)

    def n_columns(self, column_kinds: Sequence[str]) -> int:
        if not self.use_covariates:
            return 1
        per = self.spline_degree + 1 + self.n_interior_knots if self.use_splines else 1
        main = sum(per if k == CONTINUOUS else 1 for k in column_kinds)
        return main + 1 + (main if self.use_treatment_interactions else 0)


@dataclass(frozen=True)
class DesignTransform:
    """Frozen recipe mapping (a, x) rows to design rows."""

    n_covariates: int
    column_kinds: tuple[str, ...]
    use_covariates: bool
    splines: tuple[SplineKnots | None, ...]
    interactions: bool
    center: np.ndarray
    scale: np.ndarray
    column_names: tuple[str, ...]
    constant_columns: tuple[int, ...] = ()

    @property
    def q(self) -> int:
        return len(self.column_names)

    @property
    def arm_column(self) -> int:
        return self.column_names.index("a")

    def raw(self, a, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(1, -1)
        if x.shape[1] != self.n_covariates:
            raise DataError(f"expected {self.n_covariates} covariates, got {x.shape[1]}")
        a = np.broadcast_to(np.asarray(a, dtype=float), (x.shape[0],))
        if not self.use_covariates:
            return a.reshape(-1, 1).copy()
        blocks = []
        for j, knots in enumerate(self.splines):
            if knots is None:
                blocks.append(x[:, j:j + 1])
            else:
                blocks.append(knots.evaluate(x[:, j]))
        main = np.hstack(blocks) if blocks else np.empty((x.shape[0], 0))
        parts = [main, a.reshape(-1, 1)]
        if self.interactions:
            parts.append(a.reshape(-1, 1) * main)
        return np.hstack(parts)

    def apply(self, a, x) -> np.ndarray:
        return (self.raw(a, x) - self.center) / self.scale


@dataclass(frozen=True)
class DesignMatrix:
    z: np.ndarray
    transform: DesignTransform

    @property
    def constant_columns(self) -> tuple[int, ...]:
        return self.transform.constant_columns


def apply_transform(transform: DesignTransform, a_forced, x) -> np.ndarray:
    """Design rows for covariates ``x`` with the arm set to ``a_forced``.

    ``x`` may be a single row (returns a q-vector) or a matrix of rows.
    """
    single = np.asarray(x).ndim == 1
    z = transform.apply(a_forced, x)
    return z[0] if single else z


def build_design(data: TrialDataset, config: DesignConfig) -> DesignMatrix:
    """Expand and standardize covariates following ``config``.

    Column order: main effects (spline bases for continuous covariates when
    enabled, binary covariates as-is), the arm, then arm x main-effect
    products.  Constant columns are kept with scale 1 and listed in
    ``transform.constant_columns``.
    """
    splines: list[SplineKnots | None] = []
    names: list[str] = []
    if config.use_covariates:
        for j, (kind, name) in enumerate(zip(data.column_kinds, data.column_names)):
            if kind == CONTINUOUS and config.use_splines:
                v = data.x[:, j]
                knots = SplineKnots(config.spline_degree, float(v.min()), float(v.max()),
                                    quantile_knots(v, config.n_interior_knots))
                splines.append(knots)
                names.extend(f"bs({name}){k + 1}" for k in range(knots.n_basis))
            else:
                splines.append(None)
                names.append(name)
    main_names = list(names)
    names.append("a")
    if config.use_covariates and config.use_treatment_interactions:
        names.extend(f"a:{nm}" for nm in main_names)
    q = len(names)
    proto = DesignTransform(
        n_covariates=data.p, column_kinds=data.column_kinds,
        use_covariates=config.use_covariates, splines=tuple(splines),
        interactions=config.use_covariates and config.use_treatment_interactions,
        center=np.zeros(q), scale=np.ones(q), column_names=tuple(names))
    raw = proto.raw(data.a, data.x)
    constant: tuple[int, ...] = ()
    if config.standardize:
        center = raw.mean(axis=0)
        scale = raw.std(axis=0)
        flat = scale <= 1e-12 * np.maximum(1.0, np.abs(center))
        scale[flat] = 1.0
        constant = tuple(int(i) for i in np.flatnonzero(flat))
    else:
        center, scale = np.zeros(q), np.ones(q)
    for arr in (center, scale):
        arr.setflags(write=False)
    transform = DesignTransform(
        n_covariates=data.p, column_kinds=data.column_kinds,
        use_covariates=config.use_covariates, splines=tuple(splines),
        interactions=proto.interactions, center=center, scale=scale,
        column_names=tuple(names), constant_columns=constant)
    z = transform.apply(data.a, data.x)
    z.setflags(write=False)
    return DesignMatrix(z, transform)


def design_to_dict(t: DesignTransform) -> dict:
    return {
        "n_covariates": t.n_covariates,
        "column_kinds": list(t.column_kinds),
        "use_covariates": t.use_covariates,
        "splines": [None if s is None else
                    {"degree": s.degree, "lower": s.lower, "upper": s.upper,
                     "interior": list(s.interior)} for s in t.splines],
        "interactions": t.interactions,
        "center": [float(c) for c in t.center],
        "scale": [float(s) for s in t.scale],
        "column_names": list(t.column_names),
        "constant_columns": list(t.constant_columns),
    }


def design_from_dict(d: dict) -> DesignTransform:
    return DesignTransform(
        n_covariates=d["n_covariates"], column_kinds=tuple(d["column_kinds"]),
        use_covariates=d["use_covariates"],
        splines=tuple(None if s is None else SplineKnots(s["degree"], s["lower"], s["upper"],
                                                         tuple(s["interior"]))
                      for s in d["splines"]),
        interactions=d["interactions"], center=np.asarray(d["center"], dtype=float),
        scale=np.asarray(d["scale"], dtype=float), column_names=tuple(d["column_names"]),
        constant_columns=tuple(d["constant_columns"]))
