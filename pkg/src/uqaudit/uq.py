"""Uncertainty scores computed from Monte Carlo softmax samples.

Four scores are provided; for each, larger means more uncertain:

* ``naive``: one minus the largest averaged class probability.
* ``variance``: per-class population variance over the samples, averaged
  over classes.
* ``entropy``: ``-(1/C) sum_c m_c ln m_c`` of the averaged probabilities
  ``m`` (natural log, ``0 ln 0 = 0``).
* ``bc``: Bhattacharyya coefficient between the sample histograms of the two
  classes with the highest averaged probability. Overlapping histograms
  mean the model cannot separate its top two answers.

All scores are evaluated on column-sorted sample stacks (see
:func:`uqaudit.core.canonical_stack`) so they are exactly invariant to the
order of the MC samples.
"""

from __future__ import annotations

import enum
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np

from .core import (
    Cohort,
    PatientRecord,
    SampleMatrix,
    as_sample_matrix,
    canonical_stack,
    stack_means,
)
from .errors import ConfigError, DegenerateClasses

DEFAULT_BINS = 10
_CHUNK = 2048


class UqMetric(str, enum.Enum):
    NAIVE = "naive"
    VARIANCE = "variance"
    ENTROPY = "entropy"
    BC = "bc"


ALL_METRICS: tuple[UqMetric, ...] = tuple(UqMetric)


def parse_metrics(names: Iterable[str | UqMetric]) -> tuple[UqMetric, ...]:
    out = []
    for name in names:
        try:
            metric = UqMetric(name)
        except ValueError:
            choices = ", ".join(m.value for m in UqMetric)
            raise ConfigError(f"unknown uncertainty metric {name!r} (choose from {choices})")
        if metric not in out:
            out.append(metric)
    return tuple(out)


def score_bounds(metric: UqMetric, C: int) -> tuple[float, float]:
    """Closed range every score of ``metric`` lies in for ``C`` classes."""
    return {
        UqMetric.NAIVE: (0.0, 1.0 - 1.0 / C),
        UqMetric.VARIANCE: (0.0, 0.25),
        UqMetric.ENTROPY: (0.0, float(np.log(C)) / C),
        UqMetric.BC: (0.0, 1.0),
    }[UqMetric(metric)]


# -- batch kernels on canonical (N, T, C) stacks -----------------------------


def _naive(stack: np.ndarray, means: np.ndarray) -> np.ndarray:
    return 1.0 - means.max(axis=1)


def _variance(stack: np.ndarray, means: np.ndarray) -> np.ndarray:
    dev = stack - means[:, None, :]
    per_class = np.square(dev).sum(axis=1) / stack.shape[1]
    return per_class.sum(axis=1) / stack.shape[2]


def _entropy(stack: np.ndarray, means: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(means > 0.0, means * np.log(means), 0.0)
    # + 0.0 turns -0.0 into 0.0
    return -terms.sum(axis=1) / stack.shape[2] + 0.0


def top_two_classes(means: np.ndarray) -> np.ndarray:
    """Indices of the two largest means per row, ties to the lower index."""
    return np.argsort(-means, axis=1, kind="stable")[:, :2]


def bin_index(values: np.ndarray, n_bins: int) -> np.ndarray:
    """Equal-width bin over ``[0, 1]``: left-closed, last bin closed."""
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    idx = np.clip(np.floor(values * n_bins).astype(np.int64), 0, n_bins - 1)
    # floor(v * N) can land one bin off when v sits on an edge
    idx -= values < edges[idx]
    idx += (values >= edges[idx + 1]) & (idx < n_bins - 1)
    return idx


def _bc(stack: np.ndarray, means: np.ndarray, n_bins: int) -> np.ndarray:
    n, t, c = stack.shape
    if c < 2:
        raise DegenerateClasses("Bhattacharyya coefficient needs at least two classes")
    top = top_two_classes(means)
    rows = np.arange(n)
    offsets = (rows * n_bins)[:, None]
    counts = []
    for k in (0, 1):
        vals = stack[rows, :, top[:, k]]  # (n, t)
        flat = (bin_index(vals, n_bins) + offsets).ravel()
        counts.append(np.bincount(flat, minlength=n * n_bins).reshape(n, n_bins))
    # With density normalisation h = count * N / T the coefficient
    # (1/N) sum sqrt(h1 h2) reduces to sum sqrt(count1 count2) / T.
    return np.sqrt(counts[0] * counts[1]).sum(axis=1) / t


def score_stack(
    stack: np.ndarray, metrics: Sequence[UqMetric] = ALL_METRICS, n_bins: int = DEFAULT_BINS
) -> tuple[np.ndarray, dict[UqMetric, np.ndarray]]:
    """Predictions and scores for an ``(N, T, C)`` stack of sample matrices."""
    if n_bins < 1:
        raise ConfigError(f"n_bins must be a positive integer, got {n_bins}")
    stack = canonical_stack(stack)
    means = stack_means(stack)
    preds = np.argmax(means, axis=1)
    out = {}
    for metric in metrics:
        metric = UqMetric(metric)
        if metric is UqMetric.BC:
            out[metric] = _bc(stack, means, n_bins)
        else:
            out[metric] = _KERNELS[metric](stack, means)
    return preds, out


_KERNELS = {
    UqMetric.NAIVE: _naive,
    UqMetric.VARIANCE: _variance,
    UqMetric.ENTROPY: _entropy,
}


def _single(m, metric: UqMetric, n_bins: int = DEFAULT_BINS) -> float:
    m = as_sample_matrix(m)
    _, scores = score_stack(m.samples[None], (metric,), n_bins)
    return float(scores[metric][0])


def naive(m: SampleMatrix) -> float:
    """``1 - max_c mean_c``."""
    return _single(m, UqMetric.NAIVE)


def predictive_variance(m: SampleMatrix) -> float:
    return _single(m, UqMetric.VARIANCE)


def predictive_entropy(m: SampleMatrix) -> float:
    return _single(m, UqMetric.ENTROPY)


def bhattacharyya(m: SampleMatrix, n_bins: int = DEFAULT_BINS) -> float:
    """Histogram overlap of the top-two classes' samples, in ``[0, 1]``.

    The top two classes are ranked by mean probability (ties to the lower
    index); each class's ``T`` samples are binned into ``n_bins`` equal-width
    bins over ``[0, 1]``.
    """
    return _single(m, UqMetric.BC, n_bins)


def score(m: SampleMatrix, metric: UqMetric | str, n_bins: int = DEFAULT_BINS) -> float:
    return _single(m, UqMetric(metric), n_bins)


# -- cohort scoring ----------------------------------------------------------


@dataclass(frozen=True)
class UqScoreTable:
    unit_id: str
    scores: dict[UqMetric, float]


@dataclass(frozen=True, eq=False)
class UqScores:
    """Scores and predicted classes for every unit of a cohort, in cohort order."""

    unit_ids: tuple[str, ...]
    predictions: np.ndarray
    scores: dict[UqMetric, np.ndarray]
    n_bins: int = DEFAULT_BINS

    @property
    def metrics(self) -> tuple[UqMetric, ...]:
        return tuple(self.scores)

    def __len__(self) -> int:
        return len(self.unit_ids)

    def __getitem__(self, metric: UqMetric | str) -> np.ndarray:
        return self.scores[UqMetric(metric)]

    def table(self, i: int) -> UqScoreTable:
        return UqScoreTable(self.unit_ids[i], {m: float(v[i]) for m, v in self.scores.items()})


PATIENT_UQ_MODES = ("pooled", "case-mean")


def _score_matrices(
    mats: Sequence[SampleMatrix], metrics: Sequence[UqMetric], n_bins: int
) -> tuple[np.ndarray, dict[UqMetric, np.ndarray]]:
    """Score a list of matrices, batching those that share a sample count."""
    n = len(mats)
    preds = np.empty(n, dtype=np.int64)
    scores = {m: np.empty(n, dtype=np.float64) for m in metrics}
    by_t: dict[int, list[int]] = {}
    for i, m in enumerate(mats):
        by_t.setdefault(m.T, []).append(i)
    for idx in by_t.values():
        for start in range(0, len(idx), _CHUNK):
            chunk = idx[start : start + _CHUNK]
            stack = np.stack([mats[i].samples for i in chunk])
            p, s = score_stack(stack, metrics, n_bins)
            preds[chunk] = p
            for m in metrics:
                scores[m][chunk] = s[m]
    return preds, scores


def score_cohort(
    cohort: Cohort,
    metrics: Sequence[UqMetric | str] = ALL_METRICS,
    n_bins: int = DEFAULT_BINS,
    patient_uq: str = "pooled",
) -> UqScores:
    """Score every unit in ``cohort``.

    Predictions always come from the pooled samples. For patient-level
    cohorts ``patient_uq="case-mean"`` replaces each pooled score with the
    mean of the member cases' scores.
    """
    metrics = parse_metrics(metrics)
    if patient_uq not in PATIENT_UQ_MODES:
        raise ConfigError(f"patient_uq must be one of {PATIENT_UQ_MODES}, got {patient_uq!r}")
    records = cohort.records
    preds = np.empty(len(records), dtype=np.int64)
    scores = {m: np.empty(len(records), dtype=np.float64) for m in metrics}
    # Materialize pooled matrices chunk by chunk to bound memory.
    step = 8 * _CHUNK
    for start in range(0, len(records), step):
        recs = records[start : start + step]
        p, s = _score_matrices([r.samples for r in recs], metrics, n_bins)
        preds[start : start + len(recs)] = p
        for m in metrics:
            scores[m][start : start + len(recs)] = s[m]
        if patient_uq == "case-mean" and recs and isinstance(recs[0], PatientRecord):
            members = [mat for r in recs for mat in r.members]
            _, ms = _score_matrices(members, metrics, n_bins)
            bounds = np.cumsum([0] + [len(r.members) for r in recs])
            for m in metrics:
                scores[m][start : start + len(recs)] = [
                    ms[m][a:b].mean() for a, b in zip(bounds[:-1], bounds[1:])
                ]
    return UqScores(tuple(cohort.unit_ids), preds, scores, n_bins)
