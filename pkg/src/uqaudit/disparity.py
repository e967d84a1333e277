"""Uncertainty-based rejection and pairwise subgroup disparity.

Thresholds are exclusion fractions. For a fraction ``f`` over ``n`` units
the ``ceil(f * n)`` most uncertain units of the whole cohort are excluded
(ties broken by unit id) and performance is measured per subgroup on what
remains. The disparity at one threshold is the sum of absolute performance
gaps over all unordered pairs of subgroup values; the curve's
``average_delta`` is the mean of those sums over the thresholds.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .core import Cohort
from .errors import (
    ConfigError,
    SingleSubgroup,
    UndefinedCell,
    UnknownAttribute,
    UnknownValue,
)
from .metrics import ConfusionMatrix, KappaResult, kappa_from_confusion
from .uq import ALL_METRICS, DEFAULT_BINS, UqMetric, UqScores, score_cohort

logger = logging.getLogger(__name__)

DEFAULT_FRACTIONS = (0.01, 0.10, 0.25)
PERFORMANCE_METRICS = ("kappa", "accuracy")


def excluded_count(fraction: float, n: int) -> int:
    """``ceil(fraction * n)`` evaluated on the decimal value of ``fraction``.

    Plain float arithmetic would give ``ceil(0.07 * 100) == 8``.
    """
    return math.ceil(Fraction(repr(float(fraction))) * n)


def fraction_grid(step: float = 0.01, stop: float = 0.5) -> tuple[float, ...]:
    """Evenly spaced fractions ``0, step, ..., stop`` (inclusive)."""
    if step <= 0:
        raise ConfigError(f"grid step must be positive, got {step}")
    n = int(round(stop / step))
    return tuple(round(i * step, 12) for i in range(n + 1) if round(i * step, 12) < 1.0)


def check_fractions(fractions: Sequence[float]) -> tuple[float, ...]:
    fr = tuple(float(f) for f in fractions)
    if not fr:
        raise ConfigError("at least one rejection fraction is required")
    for f in fr:
        if not 0.0 <= f < 1.0:
            raise ConfigError(f"rejection fraction {f} outside [0, 1)")
    if any(b <= a for a, b in zip(fr, fr[1:])):
        raise ConfigError(f"rejection fractions must be strictly increasing: {fr}")
    return fr


@dataclass(frozen=True)
class RejectionPolicy:
    fractions: tuple[float, ...]
    metric: UqMetric

    def __post_init__(self) -> None:
        object.__setattr__(self, "fractions", check_fractions(self.fractions))
        object.__setattr__(self, "metric", UqMetric(self.metric))


@dataclass(frozen=True)
class SubgroupCell:
    attribute: str
    value: str
    fraction: float
    kappa: KappaResult
    retained: int
    excluded: int
    accuracy: Optional[float] = None

    def performance(self, name: str = "kappa") -> Optional[float]:
        if name == "kappa":
            return self.kappa.kappa
        if name == "accuracy":
            return self.accuracy
        raise ConfigError(f"unknown performance metric {name!r}")


@dataclass(frozen=True)
class DisparityPoint:
    fraction: float
    delta: Optional[float]
    evaluated_pairs: int
    skipped_pairs: int = 0


@dataclass(frozen=True)
class DisparityCurve:
    attribute: str
    metric: UqMetric
    points: tuple[DisparityPoint, ...]
    average_delta: Optional[float]
    performance: str = "kappa"
    cells: tuple[SubgroupCell, ...] = field(default=(), repr=False)
    warnings: tuple[str, ...] = ()


class ScoredCohort:
    """A cohort bundled with its predictions and uncertainty scores.

    All rejection and disparity operations run on this object; rank orders
    are computed once per metric and cached.
    """

    def __init__(self, cohort: Cohort, scores: UqScores):
        if tuple(cohort.unit_ids) != tuple(scores.unit_ids):
            raise ConfigError("scores do not belong to this cohort")
        self.cohort = cohort
        self.scores = scores
        self.labels = cohort.labels
        self.predictions = np.asarray(scores.predictions, dtype=np.int64)
        self.class_count = cohort.class_count
        self._orders: dict[UqMetric, np.ndarray] = {}
        self._codes: dict[str, tuple[list[str], np.ndarray]] = {}

    @classmethod
    def from_cohort(
        cls,
        cohort: Cohort,
        metrics: Sequence[UqMetric | str] = ALL_METRICS,
        n_bins: int = DEFAULT_BINS,
        patient_uq: str = "pooled",
    ) -> "ScoredCohort":
        return cls(cohort, score_cohort(cohort, metrics, n_bins, patient_uq))

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def unit_ids(self) -> tuple[str, ...]:
        return self.scores.unit_ids

    def rejection_indices(self, metric: UqMetric | str) -> np.ndarray:
        """Unit indices from most to least uncertain; ties by unit id."""
        metric = UqMetric(metric)
        if metric not in self._orders:
            if metric not in self.scores.scores:
                raise ConfigError(f"metric {metric.value!r} was not scored")
            s = self.scores[metric]
            # records are sorted by unit id, so index order is id order
            self._orders[metric] = np.lexsort((np.arange(len(s)), -s))
        return self._orders[metric]

    def retained_mask(self, metric: UqMetric | str, fraction: float) -> np.ndarray:
        order = self.rejection_indices(metric)
        mask = np.ones(len(order), dtype=bool)
        mask[order[: excluded_count(fraction, len(order))]] = False
        return mask

    def subgroups(self, attribute: str) -> tuple[list[str], np.ndarray]:
        """Sorted distinct values of ``attribute`` and per-unit value codes."""
        if attribute not in self._codes:
            raw = self.cohort.attribute_values(attribute)
            if any(v is None for v in raw):
                missing = sum(v is None for v in raw)
                raise UnknownAttribute(
                    f"attribute {attribute!r} missing on {missing} of {len(raw)} units"
                )
            values, codes = np.unique(np.asarray(raw, dtype=object), return_inverse=True)
            self._codes[attribute] = ([str(v) for v in values], codes.astype(np.int64))
        return self._codes[attribute]


def rejection_order(scored: ScoredCohort, metric: UqMetric | str) -> list[str]:
    ids = scored.unit_ids
    return [ids[i] for i in scored.rejection_indices(metric)]


def _confusions(
    scored: ScoredCohort, codes: np.ndarray, n_groups: int, mask: np.ndarray
) -> np.ndarray:
    C = scored.class_count
    key = codes[mask] * (C * C) + scored.labels[mask] * C + scored.predictions[mask]
    return np.bincount(key, minlength=n_groups * C * C).reshape(n_groups, C, C)


def _cells_at(
    scored: ScoredCohort, attribute: str, metric: UqMetric, fraction: float
) -> list[SubgroupCell]:
    values, codes = scored.subgroups(attribute)
    mask = scored.retained_mask(metric, fraction)
    confusions = _confusions(scored, codes, len(values), mask)
    sizes = np.bincount(codes, minlength=len(values))
    cells = []
    for k, value in enumerate(values):
        cm = ConfusionMatrix(confusions[k])
        kept = cm.total
        cells.append(
            SubgroupCell(
                attribute,
                value,
                fraction,
                kappa_from_confusion(cm),
                kept,
                int(sizes[k]) - kept,
                cm.accuracy,
            )
        )
    return cells


def subgroup_performance(
    scored: ScoredCohort,
    attribute: str,
    value: str,
    metric: UqMetric | str,
    fraction: float,
) -> SubgroupCell:
    """Performance of one subgroup after cohort-wide rejection at ``fraction``."""
    values, _ = scored.subgroups(attribute)
    if value not in values:
        raise UnknownValue(f"attribute {attribute!r} has no value {value!r}")
    cells = _cells_at(scored, attribute, UqMetric(metric), fraction)
    return cells[values.index(value)]


def cohort_performance(
    scored: ScoredCohort, metric: UqMetric | str, fraction: float
) -> SubgroupCell:
    """Whole-cohort cell after rejection (attribute ``"*"``, value ``"all"``)."""
    mask = scored.retained_mask(metric, fraction)
    cm = _confusions(scored, np.zeros(len(scored), dtype=np.int64), 1, mask)[0]
    cm = ConfusionMatrix(cm)
    return SubgroupCell(
        "*", "all", fraction, kappa_from_confusion(cm), cm.total, len(scored) - cm.total, cm.accuracy
    )


def retained_confusion(
    scored: ScoredCohort, metric: UqMetric | str, fraction: float
) -> ConfusionMatrix:
    mask = scored.retained_mask(metric, fraction)
    return ConfusionMatrix(
        _confusions(scored, np.zeros(len(scored), dtype=np.int64), 1, mask)[0]
    )


def disparity_delta(
    scored: ScoredCohort,
    attribute: str,
    policy: RejectionPolicy,
    performance: str = "kappa",
    strict: bool = False,
) -> DisparityCurve:
    """Pairwise subgroup disparity of ``performance`` across ``policy.fractions``.

    Pairs with an undefined cell are skipped and reported in
    ``skipped_pairs`` and ``warnings``; with ``strict=True`` they raise
    :class:`UndefinedCell`. A threshold where every pair was skipped has
    ``delta=None`` and is left out of ``average_delta``.
    """
    if performance not in PERFORMANCE_METRICS:
        raise ConfigError(f"unknown performance metric {performance!r}")
    values, _ = scored.subgroups(attribute)
    if len(values) < 2:
        raise SingleSubgroup(
            f"attribute {attribute!r} has {len(values)} value(s) "
            f"({', '.join(values)}); disparity needs at least two"
        )
    points = []
    all_cells: list[SubgroupCell] = []
    warnings: list[str] = []
    for fraction in policy.fractions:
        cells = _cells_at(scored, attribute, policy.metric, fraction)
        all_cells.extend(cells)
        gaps = []
        skipped = 0
        for a, b in itertools.combinations(cells, 2):
            fa, fb = a.performance(performance), b.performance(performance)
            if fa is None or fb is None:
                bad = a if fa is None else b
                msg = (
                    f"{attribute}/{policy.metric.value} at fraction {fraction:g}: "
                    f"{performance} undefined for {bad.value!r} "
                    f"(retained={bad.retained}); pair ({a.value}, {b.value}) skipped"
                )
                if strict:
                    raise UndefinedCell(msg)
                skipped += 1
                warnings.append(msg)
                continue
            gaps.append(abs(fa - fb))
        # fsum is exactly rounded, so the sum does not depend on pair order
        delta = math.fsum(gaps) if gaps else None
        points.append(DisparityPoint(fraction, delta, len(gaps), skipped))
    defined = [p.delta for p in points if p.delta is not None]
    average = math.fsum(defined) / len(defined) if defined else None
    for w in warnings:
        logger.warning(w)
    return DisparityCurve(
        attribute,
        policy.metric,
        tuple(points),
        average,
        performance,
        tuple(all_cells),
        tuple(warnings),
    )


def performance_curve(
    scored: ScoredCohort,
    attribute: str,
    metric: UqMetric | str,
    fractions: Sequence[float] | None = None,
) -> tuple[SubgroupCell, ...]:
    """One cell per (fraction, value), ordered by fraction then value."""
    fractions = check_fractions(fraction_grid() if fractions is None else fractions)
    metric = UqMetric(metric)
    scored.subgroups(attribute)
    cells: list[SubgroupCell] = []
    for fraction in fractions:
        cells.extend(_cells_at(scored, attribute, metric, fraction))
    return tuple(cells)
