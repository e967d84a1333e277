"""Domain types for Monte Carlo prediction samples and cohorts.

A :class:`SampleMatrix` holds ``T`` softmax vectors (rows) over ``C``
classes for one unit. Cases belong to patients; :func:`pool_patients` turns
a case-level cohort into a patient-level one by stacking the member cases'
rows.
"""

from __future__ import annotations

import enum
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import ConflictingAttributes, InputError, InvalidSampleMatrix

ROW_SUM_TOL = 1e-6
# Rows whose sum is already this close to 1 are kept bit-for-bit, which makes
# normalization idempotent across text round-trips.
EXACT_SUM_TOL = 1e-12


class UnitLevel(str, enum.Enum):
    CASE = "case"
    PATIENT = "patient"


def _check_rows(arr: np.ndarray) -> np.ndarray:
    if arr.ndim != 2:
        raise InvalidSampleMatrix(f"samples must be a T x C matrix, got shape {arr.shape}")
    t, c = arr.shape
    if t < 1:
        raise InvalidSampleMatrix("samples need at least one row (T >= 1)")
    if c < 2:
        raise InvalidSampleMatrix(f"samples need at least two classes, got C={c}")
    if not np.all(np.isfinite(arr)):
        raise InvalidSampleMatrix("samples contain non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise InvalidSampleMatrix("sample probabilities must lie in [0, 1]")
    sums = arr.sum(axis=1)
    err = np.abs(sums - 1.0)
    worst = int(np.argmax(err))
    if err[worst] > ROW_SUM_TOL:
        raise InvalidSampleMatrix(
            f"row {worst} sums to {sums[worst]:.9g}, outside 1 +/- {ROW_SUM_TOL:g}"
        )
    fix = err > EXACT_SUM_TOL
    if fix.any():
        arr = arr.copy()
        arr[fix] /= sums[fix, None]
    return arr


@dataclass(frozen=True, eq=False)
class SampleMatrix:
    """``T x C`` matrix of Monte Carlo softmax samples for one unit.

    Rows are validated on construction: entries in ``[0, 1]`` and row sums
    within ``ROW_SUM_TOL`` of one. Rows inside the tolerance are rescaled to
    sum to one. The stored array is read-only.
    """

    samples: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.samples, dtype=np.float64)
        arr = _check_rows(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @classmethod
    def _trusted(cls, arr: np.ndarray) -> "SampleMatrix":
        # For arrays assembled from already-validated matrices.
        obj = object.__new__(cls)
        arr.setflags(write=False)
        object.__setattr__(obj, "samples", arr)
        return obj

    @property
    def T(self) -> int:
        return self.samples.shape[0]

    @property
    def C(self) -> int:
        return self.samples.shape[1]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SampleMatrix):
            return NotImplemented
        return np.array_equal(self.samples, other.samples)

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"SampleMatrix(T={self.T}, C={self.C})"


def _check_attributes(attributes: Mapping[str, str], where: str) -> dict[str, str]:
    out = {}
    for key, value in attributes.items():
        if not isinstance(key, str) or not key:
            raise InputError(f"{where}: attribute names must be non-empty strings")
        if not isinstance(value, str) or not value:
            raise InputError(f"{where}: attribute {key!r} must have a non-empty string value")
        out[key] = value
    return out


@dataclass(frozen=True)
class CaseRecord:
    case_id: str
    patient_id: str
    label: int
    attributes: dict[str, str]
    samples: SampleMatrix

    def __post_init__(self) -> None:
        for name in ("case_id", "patient_id"):
            value = getattr(self, name)
            if not isinstance(value, str) or not value:
                raise InputError(f"{name} must be a non-empty string")
        if isinstance(self.label, bool) or not isinstance(self.label, (int, np.integer)):
            raise InputError(f"case {self.case_id!r}: label must be an integer")
        if not 0 <= self.label < self.samples.C:
            raise InputError(
                f"case {self.case_id!r}: label {self.label} outside [0, {self.samples.C})"
            )
        object.__setattr__(self, "label", int(self.label))
        object.__setattr__(
            self, "attributes", _check_attributes(self.attributes, f"case {self.case_id!r}")
        )

    @property
    def unit_id(self) -> str:
        return self.case_id


@dataclass(frozen=True)
class PatientRecord:
    """A patient pooled from one or more cases.

    ``members`` keeps each case's matrix (ordered by case id) so per-case
    scores stay available; ``samples`` is their row concatenation.
    """

    patient_id: str
    label: int
    attributes: dict[str, str]
    members: tuple[SampleMatrix, ...]
    case_ids: tuple[str, ...] = field(default=())

    @property
    def unit_id(self) -> str:
        return self.patient_id

    @property
    def samples(self) -> SampleMatrix:
        if len(self.members) == 1:
            return self.members[0]
        return SampleMatrix._trusted(np.concatenate([m.samples for m in self.members]))

    @property
    def T(self) -> int:
        return sum(m.T for m in self.members)


Record = Union[CaseRecord, PatientRecord]


@dataclass(frozen=True)
class Cohort:
    """Ordered collection of units sharing one class count.

    Records are sorted by unit id on construction; unit ids must be unique.
    """

    class_count: int
    unit_level: UnitLevel
    records: tuple[Record, ...]

    def __post_init__(self) -> None:
        if self.class_count < 2:
            raise InputError(f"class_count must be >= 2, got {self.class_count}")
        level = UnitLevel(self.unit_level)
        records = tuple(sorted(self.records, key=lambda r: r.unit_id))
        expected = CaseRecord if level is UnitLevel.CASE else PatientRecord
        seen: set[str] = set()
        for rec in records:
            if not isinstance(rec, expected):
                raise InputError(f"{level.value}-level cohort cannot hold {type(rec).__name__}")
            if rec.unit_id in seen:
                raise InputError(f"duplicate unit id {rec.unit_id!r}")
            seen.add(rec.unit_id)
            c = rec.samples.C if isinstance(rec, CaseRecord) else rec.members[0].C
            if c != self.class_count:
                raise InputError(
                    f"unit {rec.unit_id!r} has C={c}, cohort declares {self.class_count}"
                )
        object.__setattr__(self, "unit_level", level)
        object.__setattr__(self, "records", records)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def unit_ids(self) -> list[str]:
        return [r.unit_id for r in self.records]

    @property
    def labels(self) -> np.ndarray:
        return np.fromiter((r.label for r in self.records), dtype=np.int64, count=len(self))

    def attribute_names(self) -> list[str]:
        names: set[str] = set()
        for rec in self.records:
            names.update(rec.attributes)
        return sorted(names)

    def attribute_values(self, attribute: str) -> list[str | None]:
        return [r.attributes.get(attribute) for r in self.records]


def canonical_stack(stack: np.ndarray) -> np.ndarray:
    """Sort every class column of an ``(N, T, C)`` stack along the sample axis.

    Every score in this package is a function of the per-class sample
    multisets, so computing on sorted columns makes results bitwise
    independent of row order.
    """
    return np.sort(stack, axis=1)


def stack_means(sorted_stack: np.ndarray) -> np.ndarray:
    """Column means of a canonical ``(N, T, C)`` stack, shape ``(N, C)``."""
    return sorted_stack.sum(axis=1) / sorted_stack.shape[1]


def mean_prediction(m: SampleMatrix) -> np.ndarray:
    """Average the MC samples per class: ``(1/T) sum_t p[t, c]``."""
    return stack_means(canonical_stack(m.samples[None]))[0]


def predict_class(m: SampleMatrix) -> int:
    """Argmax of :func:`mean_prediction`; ties go to the lowest class index."""
    return int(np.argmax(mean_prediction(m)))


def majority_label(labels: Iterable[int]) -> int:
    """Most frequent label, ties broken toward the higher class index."""
    counts = Counter(labels)
    if not counts:
        raise InputError("cannot take a majority over no labels")
    best = max(counts.values())
    return max(lbl for lbl, n in counts.items() if n == best)


def pool_patients(cohort: Cohort) -> Cohort:
    """Pool a case-level cohort to one record per patient.

    Member matrices are row-concatenated, so the pooled mean is the plain
    mean over all member rows. Labels are pooled by majority vote.

    Raises:
        ConflictingAttributes: if member cases disagree on any attribute.
    """
    if cohort.unit_level is not UnitLevel.CASE:
        raise InputError("pool_patients expects a case-level cohort")
    groups: dict[str, list[CaseRecord]] = {}
    for rec in cohort.records:
        groups.setdefault(rec.patient_id, []).append(rec)  # type: ignore[union-attr]
    patients = []
    for pid, cases in groups.items():
        attrs = cases[0].attributes
        for other in cases[1:]:
            if other.attributes != attrs:
                diff = sorted(
                    k
                    for k in set(attrs) | set(other.attributes)
                    if attrs.get(k) != other.attributes.get(k)
                )
                raise ConflictingAttributes(
                    pid, f"{cases[0].case_id!r} vs {other.case_id!r} on {', '.join(diff)}"
                )
        patients.append(
            PatientRecord(
                patient_id=pid,
                label=majority_label(c.label for c in cases),
                attributes=dict(attrs),
                members=tuple(c.samples for c in cases),
                case_ids=tuple(c.case_id for c in cases),
            )
        )
    return Cohort(cohort.class_count, UnitLevel.PATIENT, tuple(patients))


def as_sample_matrix(m: SampleMatrix | Sequence[Sequence[float]] | np.ndarray) -> SampleMatrix:
    return m if isinstance(m, SampleMatrix) else SampleMatrix(np.asarray(m, dtype=np.float64))
