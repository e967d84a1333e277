"""Agreement metrics over predicted and true labels."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import EmptyInput, InputError, LengthMismatch


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """``C x C`` counts; rows are true labels, columns are predictions."""

    counts: np.ndarray

    @property
    def class_count(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> Optional[float]:
        total = self.total
        return float(np.trace(self.counts)) / total if total else None

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        return np.array_equal(self.counts, other.counts)

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class KappaResult:
    """Linearly weighted Cohen's kappa and its parts.

    ``kappa`` is ``None`` when it is undefined: no units, or both raters put
    every unit in the same single class so chance agreement is one.
    """

    kappa: Optional[float]
    n_units: int
    observed_agreement: Optional[float]
    chance_agreement: Optional[float]

    @property
    def defined(self) -> bool:
        return self.kappa is not None

    @classmethod
    def empty(cls) -> "KappaResult":
        return cls(None, 0, None, None)


def _as_labels(values: Sequence[int] | np.ndarray, C: int, name: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.size == 0:
        return arr.astype(np.int64).reshape(0)
    if arr.ndim != 1 or not np.issubdtype(arr.dtype, np.integer):
        raise InputError(f"{name} must be a flat list of integer class indices")
    if arr.min() < 0 or arr.max() >= C:
        raise InputError(f"{name} contains class indices outside [0, {C})")
    return arr.astype(np.int64, copy=False)


def confusion_matrix(
    preds: Sequence[int] | np.ndarray, labels: Sequence[int] | np.ndarray, C: int
) -> ConfusionMatrix:
    if len(preds) != len(labels):
        raise LengthMismatch(f"{len(preds)} predictions vs {len(labels)} labels")
    p = _as_labels(preds, C, "preds")
    y = _as_labels(labels, C, "labels")
    counts = np.bincount(y * C + p, minlength=C * C).reshape(C, C)
    return ConfusionMatrix(counts)


def linear_weights(C: int) -> np.ndarray:
    """Agreement weights ``w[i, j] = 1 - |i - j| / (C - 1)``."""
    idx = np.arange(C)
    return 1.0 - np.abs(idx[:, None] - idx[None, :]) / (C - 1)


def kappa_from_confusion(cm: ConfusionMatrix) -> KappaResult:
    counts = cm.counts
    n = cm.total
    if n == 0:
        return KappaResult.empty()
    C = cm.class_count
    w = linear_weights(C)
    observed = counts / n
    true_marg = counts.sum(axis=1) / n
    pred_marg = counts.sum(axis=0) / n
    p_o = float((w * observed).sum())
    p_e = float(true_marg @ w @ pred_marg)
    # Off-diagonal weights are < 1, so chance agreement reaches 1 exactly when
    # both raters use one and the same class.
    t_used = np.flatnonzero(true_marg)
    p_used = np.flatnonzero(pred_marg)
    if len(t_used) == 1 and len(p_used) == 1 and t_used[0] == p_used[0]:
        return KappaResult(None, n, p_o, p_e)
    return KappaResult((p_o - p_e) / (1.0 - p_e), n, p_o, p_e)


def linear_weighted_kappa(
    preds: Sequence[int] | np.ndarray, labels: Sequence[int] | np.ndarray, C: int
) -> KappaResult:
    """Linearly weighted Cohen's kappa ``(P_o - P_e) / (1 - P_e)``.

    ``P_o`` is the weighted observed agreement and ``P_e`` the weighted
    agreement expected from the two raters' marginals, both over the given
    units only.

    Raises:
        LengthMismatch: if the lists differ in length.
        EmptyInput: if the lists are empty.
    """
    if len(preds) != len(labels):
        raise LengthMismatch(f"{len(preds)} predictions vs {len(labels)} labels")
    if len(preds) == 0:
        raise EmptyInput("kappa needs at least one (prediction, label) pair")
    return kappa_from_confusion(confusion_matrix(preds, labels, C))
