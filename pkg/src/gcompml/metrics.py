"""Performance criteria over simulation replicates.

Bias of proportions (pi0, pi1, delta) is reported in percent and bias of the
log odds ratio unscaled, as in the published result tables.  Inference
criteria (RMSE, VEB, coverage, error rate, RSS) are computed on the log
marginal odds ratio.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import GCompError

REPORT_COLUMNS = ("method", "S", "mb_pi0", "mb_pi1", "mb_logmor", "mb_delta",
                  "rmse", "veb", "coverage", "error", "rss")
REPORT_HEADER = ("Method", "S", "MB pi0 (%)", "MB pi1 (%)", "MB log mOR", "MB delta (%)",
                 "RMSE", "VEB", "Coverage", "Error", "RSS")


@dataclass(frozen=True)
class ReplicateRecord:
    replicate: int
    method: str
    log_mor: float
    delta: float
    pi0: float
    pi1: float
    sd_logmor: float
    ci_lower: float
    ci_upper: float
    sd_delta: float = math.nan
    ci_delta_lower: float = math.nan
    ci_delta_upper: float = math.nan

    def __post_init__(self):
        if self.ci_lower > self.ci_upper:
            raise ValueError("ci_lower must not exceed ci_upper")


def _arr(v) -> np.ndarray:
    return np.asarray(v, dtype=float)


def mean_bias(estimates, truth: float, percent: bool = False) -> float:
    """Average deviation from the truth, times 100 when ``percent``."""
    est = _arr(estimates)
    if est.size == 0:
        raise ValueError("no estimates")
    mb = float(np.mean(est - truth))
    return 100.0 * mb if percent else mb


def empirical_sd(estimates, truth: float) -> float:
    est = _arr(estimates)
    return math.sqrt(float(np.sum((est - truth) ** 2)) / (est.size - 1))


def variance_estimation_bias(estimates, sds, truth: float) -> float:
    """Relative gap (%) between the mean estimated SD and the truth-centered empirical SD."""
    est = _arr(estimates)
    if est.size < 2:
        raise ValueError("need at least two replicates")
    emp = empirical_sd(est, truth)
    if emp == 0:
        raise GCompError("empirical SD is zero; variance estimation bias undefined")
    return (float(np.mean(_arr(sds))) - emp) / emp * 100.0


def rmse(estimates, truth: float) -> float:
    est = _arr(estimates)
    return math.sqrt(float(np.mean((est - truth) ** 2)))


def coverage(lower, upper, truth: float) -> float:
    """Percent of closed intervals containing the truth."""
    lo, hi = _arr(lower), _arr(upper)
    return 100.0 * float(np.mean((lo <= truth) & (truth <= hi)))


def rejection_rate(lower, upper) -> float:
    lo, hi = _arr(lower), _arr(upper)
    return 100.0 * float(np.mean((lo > 0) | (hi < 0)))


def error_rate(lower, upper, truth_is_null: bool) -> float:
    """Type I error under a null truth, type II error (100 - power) otherwise."""
    rej = rejection_rate(lower, upper)
    return rej if truth_is_null else 100.0 - rej


def reduction_in_sample_size(adj_estimates, adj_sds, ref_estimates, ref_sds) -> float:
    """``(1 - (z_ref / z_adj)^2) * 100`` with ``z = sum(estimates) / sum(sds)``."""
    if len(adj_estimates) != len(ref_estimates):
        raise ValueError("adjusted and reference records must cover the same replicates")
    z_adj = float(np.sum(_arr(adj_estimates))) / float(np.sum(_arr(adj_sds)))
    z_ref = float(np.sum(_arr(ref_estimates))) / float(np.sum(_arr(ref_sds)))
    if z_adj == 0:
        raise GCompError("adjusted z statistic is zero; RSS undefined")
    return (1.0 - (z_ref / z_adj) ** 2) * 100.0


# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MethodMetrics:
    method: str
    S: int
    mb_pi0: float
    mb_pi1: float
    mb_logmor: float
    mb_delta: float
    rmse: float
    veb: float
    coverage: float
    error: float
    rss: float

    def __post_init__(self):
        for name in ("coverage", "error"):
            v = getattr(self, name)
            if not (0.0 <= v <= 100.0):
                raise ValueError(f"{name} out of range: {v}")
        if self.rmse < 0:
            raise ValueError("rmse must be >= 0")


@dataclass(frozen=True)
class MetricsReport:
    rows: tuple[MethodMetrics, ...]
    truth_log_mor: float
    truth_is_null: bool

    def row(self, method: str) -> MethodMetrics:
        for r in self.rows:
            if r.method == method:
                return r
        raise KeyError(method)

    def as_dicts(self) -> list[dict]:
        return [asdict(r) for r in self.rows]


def _is_null(truth) -> bool:
    mor = getattr(truth, "mor", None)
    if mor is not None:
        return math.isclose(mor, 1.0)
    return abs(truth.log_mor) < 1e-3


def build_report(records, truth, methods=None, reference: str = "unadjusted",
                 truth_is_null: bool | None = None) -> MetricsReport:
    """One row of criteria per method.

    ``truth`` needs ``pi0``, ``pi1``, ``log_mor`` and ``delta`` attributes.  RSS
    uses the replicates shared with the ``reference`` method and is NaN when
    the reference is absent (or is the method itself, where it is 0).
    """
    records = list(records)
    by_method: dict[str, list[ReplicateRecord]] = {}
    for r in records:
        by_method.setdefault(r.method, []).append(r)
    if methods is None:
        methods = list(by_method)
    if not methods:
        raise ValueError("no methods to report")
    null = _is_null(truth) if truth_is_null is None else truth_is_null
    ref = {r.replicate: r for r in by_method.get(reference, [])}
    rows = []
    for m in methods:
        recs = sorted(by_method.get(m, []), key=lambda r: r.replicate)
        if not recs:
            raise ValueError(f"method {m!r} has no replicates")
        th = [r.log_mor for r in recs]
        lo = [r.ci_lower for r in recs]
        hi = [r.ci_upper for r in recs]
        sds = [r.sd_logmor for r in recs]
        if m == reference:
            rss = 0.0
        elif ref:
            shared = [r for r in recs if r.replicate in ref]
            rss = reduction_in_sample_size([r.log_mor for r in shared],
                                           [r.sd_logmor for r in shared],
                                           [ref[r.replicate].log_mor for r in shared],
                                           [ref[r.replicate].sd_logmor for r in shared]) \
                if shared else math.nan
        else:
            rss = math.nan
        rows.append(MethodMetrics(
            method=m, S=len(recs),
            mb_pi0=mean_bias([r.pi0 for r in recs], truth.pi0, percent=True),
            mb_pi1=mean_bias([r.pi1 for r in recs], truth.pi1, percent=True),
            mb_logmor=mean_bias(th, truth.log_mor),
            mb_delta=mean_bias([r.delta for r in recs], truth.delta, percent=True),
            rmse=rmse(th, truth.log_mor),
            veb=variance_estimation_bias(th, sds, truth.log_mor) if len(recs) > 1 else math.nan,
            coverage=coverage(lo, hi, truth.log_mor),
            error=error_rate(lo, hi, null),
            rss=rss))
    return MetricsReport(tuple(rows), float(truth.log_mor), null)


def format_report(report: MetricsReport, title: str = "") -> str:
    """Fixed-width text rendering of a report."""
    def cell(name, v):
        if name == "method":
            return str(v)
        if name == "S":
            return str(v)
        if isinstance(v, float) and math.isnan(v):
            return "-"
        if name in ("mb_logmor", "rmse"):
            return f"{v:.4f}"
        return f"{v:.2f}%"

    table = [REPORT_HEADER] + [tuple(cell(f.name, getattr(r, f.name)) for f in fields(r))
                               for r in report.rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(REPORT_HEADER))]
    lines = [title] if title else []
    for k, row in enumerate(table):
        lines.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w)
                               for i, (c, w) in enumerate(zip(row, widths))))
        if k == 0:
            lines.append("-" * len(lines[-1]))
    return "\n".join(lines) + "\n"
