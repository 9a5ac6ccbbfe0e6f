"""Command-line entry points: simulate, calibrate, analyze, report.

Exit codes: 0 success, 1 usage error, 2 data or I/O error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, format_float, load
from .data import read_csv
from .errors import DataError, GCompError
from .metrics import REPORT_COLUMNS, ReplicateRecord, build_report, format_report
from .pipeline import MethodResult, analyze, spec_summary
from .rng import child_seed, stream
from .simgen import ScenarioSpec, TruthRecord, generate, theoretical_auc, truth_from_sums, truth_sums

log = logging.getLogger("gcompml")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
SIM_BOOTSTRAP = 500
ANALYZE_BOOTSTRAP = 1000
TRUTH_CHUNK = 5000
AUC_SAMPLE = 1_000_000

RECORD_COLUMNS = ("scenario", "n", "mor", "beta", "replicate", "method", "status", "pi0", "pi1",
                  "delta", "log_mor", "sd_logmor", "ci_lower", "ci_upper", "sd_delta",
                  "ci_delta_lower", "ci_delta_upper", "cv_auc", "b_effective", "n_boot_failed",
                  "params")
FOREST_COLUMNS = ("method", "status", "log_mor", "ci_lower", "ci_upper", "sd_logmor", "auc",
                  "pi0", "pi1", "delta", "sd_delta", "ci_delta_lower", "ci_delta_upper",
                  "b_effective", "n_boot_failed", "params")
TRUTH_COLUMNS = ("scenario", "mor", "beta", "n", "pi0", "pi1", "log_mor", "delta", "n_reps",
                 "mc_se", "mc_se_delta", "n_resampled", "auc")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# --------------------------------------------------------------------------
# helpers


def cell_key(spec: ScenarioSpec) -> str:
    return f"{spec.scenario}/n={spec.n}/beta={spec.beta!r}"


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    return str(v)


def _outdir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create output directory {out}: {exc}") from None
    return out


def _write_csv(path: Path, columns, rows) -> str:
    """Write rows (dicts) and return the file's SHA-256."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in columns])
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out: Path, manifest: dict) -> None:
    manifest = {"tool": "gcompml", "version": __version__, **manifest}
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def result_row(res: MethodResult) -> dict:
    row = {"method": res.method, "status": res.status, "cv_auc": res.cv_auc,
           "params": _json(spec_summary(res.spec))}
    b = res.boot
    if b is not None:
        p = b.point
        row.update(pi0=p.pi0, pi1=p.pi1, delta=p.delta, log_mor=p.log_mor,
                   sd_logmor=b.sd_logmor, ci_lower=b.ci_logmor[0], ci_upper=b.ci_logmor[1],
                   sd_delta=b.sd_delta, ci_delta_lower=b.ci_delta[0],
                   ci_delta_upper=b.ci_delta[1], b_effective=b.b_effective,
                   n_boot_failed=b.n_failed)
    return row


# --------------------------------------------------------------------------
# simulate


def _sim_job(args):
    cfg, cell_index, r = args
    spec = cfg.cells[cell_index].spec()
    key = cell_key(spec)
    data = generate(spec, stream(cfg.seed, "data:" + key, r))
    results = analyze(data, cfg.learners, cfg.n_boot(SIM_BOOTSTRAP),
                      child_seed(cfg.seed, "analysis:" + key, r), folds=cfg.folds,
                      designs=cfg.designs, grids=cfg.grids)
    base = {"scenario": spec.scenario, "n": spec.n, "mor": spec.mor, "beta": spec.beta,
            "replicate": r}
    return [dict(base, **result_row(res)) for res in results]


def _ordered_map(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        for job in jobs:
            yield fn(job)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(fn, jobs, chunksize=1)


def cmd_simulate(cfg: RunConfig) -> int:
    if not cfg.cells:
        raise ConfigError("simulate needs at least one cell (config 'cells' or --scenario/--n/--effect)")
    out = _outdir(cfg.out)
    jobs = [(cfg, c, r) for c in range(len(cfg.cells)) for r in range(cfg.reps)]
    failures: dict[str, int] = {}
    n_rows = 0

    def rows():
        nonlocal n_rows
        for i, batch in enumerate(_ordered_map(_sim_job, jobs, cfg.workers)):
            for row in batch:
                if row["status"] != "ok":
                    failures[row["method"]] = failures.get(row["method"], 0) + 1
                n_rows += 1
                yield row
            log.info("replicate %d/%d done", i + 1, len(jobs))

    digest = _write_csv(out / "records.csv", RECORD_COLUMNS, rows())
    _write_manifest(out, {
        "command": "simulate", "config": cfg.to_dict(),
        "bootstrap": cfg.n_boot(SIM_BOOTSTRAP),
        "cells": [{"key": cell_key(c.spec()), "data_stream": "data:" + cell_key(c.spec()),
                   "analysis_seed_tag": "analysis:" + cell_key(c.spec())} for c in cfg.cells],
        "records": {"file": "records.csv", "rows": n_rows, "sha256": digest,
                    "columns": list(RECORD_COLUMNS)},
        "failures": dict(sorted(failures.items()))})
    return EXIT_OK


# --------------------------------------------------------------------------
# calibrate


def _truth_job(args):
    spec, seed, start, stop = args
    return truth_sums(spec, seed, start, stop)


def cmd_calibrate(cfg: RunConfig) -> int:
    if not cfg.cells:
        raise ConfigError("calibrate needs at least one cell (config 'cells' or --scenario/--effect)")
    out = _outdir(cfg.out)
    rows = []
    for cell in cfg.cells:
        spec = cell.spec()
        spec = ScenarioSpec(spec.scenario, cfg.truth_n, spec.beta, spec.mor)
        seed = child_seed(cfg.seed, "calibrate:" + cell_key(spec))
        jobs = [(spec, seed, s, min(s + TRUTH_CHUNK, cfg.truth_reps))
                for s in range(0, cfg.truth_reps, TRUTH_CHUNK)]
        sums = np.zeros(7)
        for part in _ordered_map(_truth_job, jobs, cfg.workers):
            sums = sums + part
        rec = truth_from_sums(spec, sums, cfg.truth_reps)
        auc = theoretical_auc(spec, AUC_SAMPLE, child_seed(cfg.seed, "auc:" + cell_key(spec)))
        row = {c: getattr(rec, c) for c in TRUTH_COLUMNS if c != "auc"}
        row["auc"] = auc
        rows.append(row)
    digest = _write_csv(out / "truth.csv", TRUTH_COLUMNS, rows)
    _write_manifest(out, {"command": "calibrate", "config": cfg.to_dict(),
                          "chunk": TRUTH_CHUNK, "auc_sample": AUC_SAMPLE,
                          "truth": {"file": "truth.csv", "rows": len(rows), "sha256": digest}})
    return EXIT_OK


def read_truths(path) -> dict[tuple[str, float], TruthRecord]:
    truths = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            try:
                rec = TruthRecord(row["scenario"], float(row["beta"]),
                                  float(row["mor"]) if row.get("mor") else None, int(row["n"]),
                                  float(row["pi0"]), float(row["pi1"]), float(row["log_mor"]),
                                  float(row["delta"]), int(row["n_reps"]), float(row["mc_se"]),
                                  float(row["mc_se_delta"]), int(row["n_resampled"]))
            except (KeyError, ValueError) as exc:
                raise DataError(f"{path}: malformed truth row ({exc})") from None
            truths[(rec.scenario, rec.beta)] = rec
    return truths


# --------------------------------------------------------------------------
# analyze


def cmd_analyze(cfg: RunConfig, dataset, schema=None) -> int:
    data = read_csv(dataset, schema)
    if np.all(data.y == data.y[0]):
        raise DataError("outcome is constant; no effect can be estimated")
    if data.a.min() == data.a.max():
        raise DataError("only one arm is present")
    out = _outdir(cfg.out)
    n_boot = cfg.n_boot(ANALYZE_BOOTSTRAP)
    results = analyze(data, cfg.learners, n_boot, cfg.seed, folds=cfg.folds,
                      designs=cfg.designs, grids=cfg.grids, workers=cfg.workers)
    rows = []
    for res in results:
        row = result_row(res)
        row["auc"] = row.pop("cv_auc")
        rows.append(row)
    digest = _write_csv(out / "forest.csv", FOREST_COLUMNS, rows)
    _write_manifest(out, {"command": "analyze", "config": cfg.to_dict(), "bootstrap": n_boot,
                          "dataset": {"file": Path(dataset).name, "n": data.n, "p": data.p,
                                      "sha256": hashlib.sha256(Path(dataset).read_bytes()).hexdigest()},
                          "forest": {"file": "forest.csv", "sha256": digest},
                          "failures": {r.method: r.message for r in results if not r.ok}})
    for res in results:
        if res.ok:
            b = res.boot
            print(f"{res.method:13s} log mOR {b.point.log_mor: .4f} "
                  f"[{b.ci_logmor[0]: .4f}, {b.ci_logmor[1]: .4f}]  AUC {res.cv_auc:.4f}")
        else:
            print(f"{res.method:13s} {res.status}: {res.message}")
    if all(not r.ok for r in results):
        raise GCompError("every learner failed")
    return EXIT_OK


# --------------------------------------------------------------------------
# report


def read_records(paths) -> list[dict]:
    rows = []
    for path in paths:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or "method" not in reader.fieldnames:
                raise DataError(f"{path} is not a record file")
            rows.extend(reader)
    return rows


def _to_record(row: dict) -> ReplicateRecord:
    f = lambda k: float(row[k]) if row.get(k) not in (None, "") else math.nan  # noqa: E731
    return ReplicateRecord(int(row["replicate"]), row["method"], f("log_mor"), f("delta"),
                           f("pi0"), f("pi1"), f("sd_logmor"), f("ci_lower"), f("ci_upper"),
                           f("sd_delta"), f("ci_delta_lower"), f("ci_delta_upper"))


def cmd_report(record_paths, truth_path, out_dir, methods=None) -> int:
    rows = read_records(record_paths)
    truths = read_truths(truth_path)
    cells: dict[tuple, list[dict]] = {}
    for row in rows:
        cells.setdefault((row["scenario"], int(row["n"]), float(row["beta"])), []).append(row)
    if not cells:
        raise DataError("no records to report")
    out = _outdir(out_dir)
    table, text = [], []
    for (scenario, n, beta), cell_rows in sorted(cells.items()):
        truth = truths.get((scenario, beta))
        if truth is None:
            raise DataError(f"no truth for scenario {scenario!r} with beta={beta!r}")
        ok = [_to_record(r) for r in cell_rows if r["status"] == "ok"]
        order = list(dict.fromkeys(r["method"] for r in cell_rows))
        wanted = [m for m in (methods or order) if any(r.method == m for r in ok)]
        if not wanted:
            raise DataError(f"no successful replicates to report for {scenario} n={n}")
        report = build_report(ok, truth, wanted)
        mor = cell_rows[0]["mor"]
        for r in report.as_dicts():
            table.append({"scenario": scenario, "n": n, "mor": mor, "beta": beta, **r})
        text.append(format_report(report, f"{scenario}  n={n}  mOR={mor or '-'}  "
                                          f"(true log mOR {truth.log_mor:.4f})"))
    cols = ("scenario", "n", "mor", "beta") + REPORT_COLUMNS
    _write_csv(out / "report.csv", cols, table)
    body = "\n".join(text)
    (out / "report.txt").write_text(body)
    sys.stdout.write(body)
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing


def _common(p: argparse.ArgumentParser, sim: bool = True):
    p.add_argument("--config", help="YAML or JSON run configuration")
    p.add_argument("--seed", type=int, help="master seed (required here or in the config)")
    p.add_argument("--workers", type=int, help="worker processes (results do not depend on it)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--learners", help="comma-separated learner kinds")
    p.add_argument("--bootstrap", type=int, help="bootstrap replicates B")
    if sim:
        p.add_argument("--scenario", help="complex, simple or simple_reduced")
        p.add_argument("--n", type=int, help="sample size per simulated trial")
        p.add_argument("--effect", type=float, help="target marginal odds ratio label")
        p.add_argument("--reps", type=int, help="number of replicates")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gcompml", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"gcompml {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _common(sub.add_parser("simulate", help="run a Monte Carlo study and write replicate records"))
    _common(sub.add_parser("calibrate", help="estimate true marginal effects by simulation"))
    p = sub.add_parser("analyze", help="estimate marginal effects for one CSV dataset")
    p.add_argument("dataset", help="CSV with columns y, a and covariates")
    p.add_argument("--schema", help="YAML/JSON mapping of covariate name to kind")
    _common(p, sim=False)
    p = sub.add_parser("report", help="aggregate record files into performance tables")
    p.add_argument("records", nargs="+", help="record CSV files from simulate")
    p.add_argument("--truth", required=True, help="truth CSV from calibrate")
    p.add_argument("--out", default="report", help="output directory")
    p.add_argument("--learners", help="methods to report, in order")
    return parser


def _overrides(args) -> dict:
    keys = ("seed", "workers", "out", "learners", "bootstrap", "scenario", "n", "effect", "reps")
    return {k: getattr(args, k, None) for k in keys}


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "report":
        methods = args.learners.split(",") if args.learners else None
        return cmd_report(args.records, args.truth, args.out, methods)
    ov = _overrides(args)
    if args.command == "calibrate":
        ov["truth_reps"] = ov.pop("reps")
        # --n is the calibration trial size, not a cell override
        ov["truth_n"] = ov.pop("n")
        if ov["scenario"] is not None:
            ov["n"] = ov["truth_n"] or 200
    cfg = load(args.config, ov)
    if args.command == "simulate":
        return cmd_simulate(cfg)
    if args.command == "calibrate":
        return cmd_calibrate(cfg)
    return cmd_analyze(cfg, args.dataset, args.schema)


def main(argv=None) -> int:
    try:
        code = run(argv)
    except UsageError as exc:
        print(f"gcompml: error: {exc}", file=sys.stderr)
        code = EXIT_USAGE
    except ConfigError as exc:
        print(f"gcompml: configuration error: {exc}", file=sys.stderr)
        code = EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"gcompml: data error: {exc}", file=sys.stderr)
        code = EXIT_DATA
    except GCompError as exc:
        print(f"gcompml: numerical failure: {exc}", file=sys.stderr)
        code = EXIT_NUMERIC
    return code


if __name__ == "__main__":
    sys.exit(main())
