"""Audit reports and their on-disk layout.

A report directory holds::

    summary.csv                      per-subgroup kappa, mean scores, share
    disparity.csv                    delta per attribute x metric x fraction
    curves_<attribute>_<metric>.csv  delta and per-subgroup kappa on a grid
    confusion_<metric>.csv           confusion matrix after rejection
    run.json                         configuration, versions, warnings

Rows and columns are emitted in a fixed order and numbers use 6 significant
digits, so identical inputs give byte-identical directories.
"""

from __future__ import annotations

import csv
import io as _stdio
import json
import re
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import __version__
from .disparity import (
    DEFAULT_FRACTIONS,
    DisparityCurve,
    RejectionPolicy,
    ScoredCohort,
    SubgroupCell,
    check_fractions,
    cohort_performance,
    disparity_delta,
    fraction_grid,
    retained_confusion,
)
from .errors import AuditError, InputError
from .io import fmt, parse_cell
from .metrics import ConfusionMatrix, KappaResult, kappa_from_confusion
from .uq import UqMetric

DEFAULT_CONFUSION_FRACTION = 0.20


@dataclass(frozen=True)
class SummaryRow:
    kind: str  # "attribute", "label" or "overall"
    attribute: str
    value: str
    n_units: int
    share: float
    kappa: KappaResult
    uq_means: dict[UqMetric, float]


@dataclass
class AuditReport:
    metrics: tuple[UqMetric, ...]
    summary: list[SummaryRow]
    disparity: list[DisparityCurve]
    cohort_cells: dict[UqMetric, list[SubgroupCell]]
    confusion: dict[UqMetric, ConfusionMatrix]
    curves: list[DisparityCurve]
    curve_cohort_cells: dict[UqMetric, list[SubgroupCell]]
    warnings: list[str] = field(default_factory=list)
    metadata: dict[str, Any] = field(default_factory=dict)


def _summary_rows(
    scored: ScoredCohort, attributes: Sequence[str], metrics: Sequence[UqMetric]
) -> list[SummaryRow]:
    n = len(scored)
    C = scored.class_count

    def row(kind: str, attribute: str, value: str, mask: np.ndarray, kappa: bool = True):
        size = int(mask.sum())
        if kappa:
            key = scored.labels[mask] * C + scored.predictions[mask]
            cm = ConfusionMatrix(np.bincount(key, minlength=C * C).reshape(C, C))
            k = kappa_from_confusion(cm)
        else:
            k = KappaResult(None, size, None, None)
        means = {m: float(scored.scores[m][mask].mean()) if size else None for m in metrics}
        return SummaryRow(kind, attribute, value, size, size / n, k, means)

    rows = []
    for attribute in attributes:
        values, codes = scored.subgroups(attribute)
        for k, value in enumerate(values):
            rows.append(row("attribute", attribute, value, codes == k))
    # Kappa is not meaningful within a single true class.
    for c in range(C):
        rows.append(row("label", "label", str(c), scored.labels == c, kappa=False))
    rows.append(row("overall", "overall", "all", np.ones(n, dtype=bool)))
    return rows


def _dedupe(items: Sequence[str]) -> list[str]:
    return list(dict.fromkeys(items))


def build_report(
    scored: ScoredCohort,
    attributes: Sequence[str],
    metrics: Sequence[UqMetric | str],
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
    grid: Sequence[float] | None = None,
    confusion_fraction: float = DEFAULT_CONFUSION_FRACTION,
    strict: bool = False,
    performance: str = "kappa",
    metadata: dict[str, Any] | None = None,
) -> AuditReport:
    metrics = tuple(UqMetric(m) for m in metrics)
    fractions = check_fractions(fractions)
    grid = check_fractions(fraction_grid() if grid is None else grid)
    check_fractions([confusion_fraction])
    disparity, curves, warnings = [], [], []
    for attribute in attributes:
        for metric in metrics:
            curve = disparity_delta(
                scored, attribute, RejectionPolicy(fractions, metric), performance, strict
            )
            disparity.append(curve)
            warnings.extend(curve.warnings)
            gcurve = disparity_delta(
                scored, attribute, RejectionPolicy(grid, metric), performance, strict
            )
            curves.append(gcurve)
            warnings.extend(gcurve.warnings)
    return AuditReport(
        metrics=metrics,
        summary=_summary_rows(scored, attributes, metrics),
        disparity=disparity,
        cohort_cells={m: [cohort_performance(scored, m, f) for f in fractions] for m in metrics},
        confusion={m: retained_confusion(scored, m, confusion_fraction) for m in metrics},
        curves=curves,
        curve_cohort_cells={m: [cohort_performance(scored, m, f) for f in grid] for m in metrics},
        warnings=_dedupe(warnings),
        metadata=dict(metadata or {}),
    )


# -- writing -----------------------------------------------------------------


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", text)


def _csv(rows: Sequence[Sequence[Any]]) -> str:
    buf = _stdio.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for r in rows:
        writer.writerow([fmt(x) for x in r])
    return buf.getvalue()


def summary_table(report: AuditReport) -> list[list[Any]]:
    header = ["kind", "attribute", "value", "n_units", "share", "kappa"]
    header += [f"{m.value}_mean" for m in report.metrics]
    rows: list[list[Any]] = [header]
    for r in report.summary:
        rows.append(
            [r.kind, r.attribute, r.value, r.n_units, r.share, r.kappa.kappa]
            + [r.uq_means[m] for m in report.metrics]
        )
    return rows


def disparity_table(report: AuditReport) -> list[list[Any]]:
    rows: list[list[Any]] = [
        [
            "attribute",
            "metric",
            "performance",
            "fraction",
            "delta",
            "evaluated_pairs",
            "skipped_pairs",
            "average_delta",
            "cohort_kappa",
            "retained",
            "excluded",
        ]
    ]
    for curve in report.disparity:
        cohort = report.cohort_cells[curve.metric]
        for point, cell in zip(curve.points, cohort):
            rows.append(
                [
                    curve.attribute,
                    curve.metric.value,
                    curve.performance,
                    point.fraction,
                    point.delta,
                    point.evaluated_pairs,
                    point.skipped_pairs,
                    curve.average_delta,
                    cell.kappa.kappa,
                    cell.retained,
                    cell.excluded,
                ]
            )
    return rows


def curve_table(curve: DisparityCurve, cohort: Sequence[SubgroupCell]) -> list[list[Any]]:
    values = list(dict.fromkeys(c.value for c in curve.cells))
    header = ["fraction", "delta", "evaluated_pairs", "cohort_kappa"]
    header += [f"{curve.performance}_{v}" for v in values]
    rows: list[list[Any]] = [header]
    by_fraction: dict[float, dict[str, SubgroupCell]] = {}
    for cell in curve.cells:
        by_fraction.setdefault(cell.fraction, {})[cell.value] = cell
    for point, whole in zip(curve.points, cohort):
        cells = by_fraction[point.fraction]
        rows.append(
            [point.fraction, point.delta, point.evaluated_pairs, whole.kappa.kappa]
            + [cells[v].performance(curve.performance) for v in values]
        )
    return rows


def confusion_table(cm: ConfusionMatrix) -> list[list[Any]]:
    C = cm.class_count
    rows: list[list[Any]] = [["true_label"] + [f"pred_{j}" for j in range(C)]]
    for i in range(C):
        rows.append([i] + [int(x) for x in cm.counts[i]])
    return rows


def write_report(report: AuditReport, out_dir: str | Path) -> list[Path]:
    """Write every report file into ``out_dir``; returns the paths written."""
    out = Path(out_dir)
    files: dict[str, str] = {
        "summary.csv": _csv(summary_table(report)),
        "disparity.csv": _csv(disparity_table(report)),
    }
    for curve in report.curves:
        name = f"curves_{_slug(curve.attribute)}_{curve.metric.value}.csv"
        files[name] = _csv(curve_table(curve, report.curve_cohort_cells[curve.metric]))
    for metric, cm in report.confusion.items():
        files[f"confusion_{metric.value}.csv"] = _csv(confusion_table(cm))
    meta = dict(report.metadata)
    meta["version"] = __version__
    meta["warnings"] = report.warnings
    meta["files"] = sorted(files)
    files["run.json"] = json.dumps(meta, indent=2, sort_keys=True) + "\n"
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for name in sorted(files):
            path = out / name
            path.write_text(files[name], encoding="utf-8", newline="\n")
            paths.append(path)
    except OSError as exc:
        raise AuditError(f"cannot write report to {out}: {exc}") from None
    return paths


# -- multi-run aggregation ---------------------------------------------------

# metadata that may legitimately differ between repeated runs
_RUN_SPECIFIC = {"seed", "input", "input_sha256", "generator_config", "warnings"}
_KEYS = {
    "summary.csv": ("kind", "attribute", "value"),
    "disparity.csv": ("attribute", "metric", "performance", "fraction"),
}


def _read_csv(path: Path) -> list[list[str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.reader(fh))


def _comparable(meta: dict[str, Any]) -> dict[str, Any]:
    config = {k: v for k, v in meta.get("config", {}).items() if k not in _RUN_SPECIFIC}
    return {"config": config, "version": meta.get("version")}


def _mean_std(values: list[Optional[float]]) -> tuple[Optional[float], Optional[float]]:
    vals = [v for v in values if v is not None]
    if not vals:
        return None, None
    arr = np.array(vals)
    std = float(arr.std(ddof=1)) if len(arr) > 1 else None
    return float(arr.mean()), std


def aggregate_runs(run_dirs: Sequence[str | Path], out_dir: str | Path) -> list[Path]:
    """Mean and sample std of every numeric summary/disparity cell over runs.

    Runs must share their configuration apart from seed and input.
    """
    dirs = [Path(d) for d in run_dirs]
    if not dirs:
        raise InputError("aggregate needs at least one run directory")
    metas = []
    for d in dirs:
        try:
            metas.append(json.loads((d / "run.json").read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read {d / 'run.json'}: {exc}") from None
    ref = _comparable(metas[0])
    for d, meta in zip(dirs[1:], metas[1:]):
        if _comparable(meta) != ref:
            raise InputError(f"run {d} was produced with a different configuration")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, keys in _KEYS.items():
        tables = []
        for d in dirs:
            try:
                tables.append(_read_csv(d / name))
            except OSError as exc:
                raise InputError(f"cannot read {d / name}: {exc.strerror}") from None
        header = tables[0][0]
        key_idx = [header.index(k) for k in keys]
        num_idx = [i for i in range(len(header)) if header[i] not in keys]
        for d, t in zip(dirs, tables):
            if t[0] != header or [[r[i] for i in key_idx] for r in t[1:]] != [
                [r[i] for i in key_idx] for r in tables[0][1:]
            ]:
                raise InputError(f"{d / name} does not line up with {dirs[0] / name}")
        rows: list[list[Any]] = [
            list(keys) + [f"{header[i]}_{s}" for i in num_idx for s in ("mean", "std")] + ["n_runs"]
        ]
        for r in range(1, len(tables[0])):
            line: list[Any] = [tables[0][r][i] for i in key_idx]
            for i in num_idx:
                m, s = _mean_std([parse_cell(t[r][i]) for t in tables])
                line += [m, s]
            rows.append(line + [len(dirs)])
        path = out / name
        path.write_text(_csv(rows), encoding="utf-8", newline="\n")
        written.append(path)
    meta = {"runs": [str(d) for d in dirs], "n_runs": len(dirs), "version": __version__}
    path = out / "aggregate.json"
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(path)
    return written
