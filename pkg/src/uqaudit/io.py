"""Cohort files: one JSON object per line.

Each line holds exactly the fields ``case_id``, ``patient_id``, ``label``,
``attributes`` and ``samples``::

    {"case_id":"P1-C01","patient_id":"P1","label":2,"attributes":{"race":"asian"},"samples":[[0.1,0.2,0.6,0.1],...]}

Floats are written in shortest round-trip form so that a write/load cycle
reproduces every sample bit for bit.
"""

from __future__ import annotations

import hashlib
import math
from collections.abc import Iterable
from pathlib import Path

import numpy as np
import orjson

from .core import CaseRecord, Cohort, SampleMatrix, UnitLevel
from .errors import (
    DuplicateCaseId,
    InputError,
    InvalidSampleMatrix,
    InvariantViolation,
    ParseError,
)

FIELDS = ("case_id", "patient_id", "label", "attributes", "samples")
NA = "NA"


def _parse_line(text: str, lineno: int) -> dict:
    try:
        obj = orjson.loads(text)
    except orjson.JSONDecodeError as exc:
        raise ParseError(lineno, f"invalid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise ParseError(lineno, "record must be a JSON object")
    missing = [f for f in FIELDS if f not in obj]
    if missing:
        raise ParseError(lineno, f"missing field(s): {', '.join(missing)}")
    extra = sorted(set(obj) - set(FIELDS))
    if extra:
        raise ParseError(lineno, f"unexpected field(s): {', '.join(extra)}")
    return obj


def _record(obj: dict, lineno: int, expected_C: int | None) -> CaseRecord:
    for name in ("case_id", "patient_id"):
        if not isinstance(obj[name], str) or not obj[name]:
            raise InvariantViolation(lineno, f"{name} must be a non-empty string")
    label = obj["label"]
    if isinstance(label, bool) or not isinstance(label, int):
        raise InvariantViolation(lineno, f"label must be an integer, got {label!r}")
    attrs = obj["attributes"]
    if not isinstance(attrs, dict):
        raise ParseError(lineno, "attributes must be an object")
    for key, value in attrs.items():
        if not key or not isinstance(value, str) or not value:
            raise InvariantViolation(
                lineno, f"attribute {key!r} must map a non-empty name to a non-empty string"
            )
    try:
        arr = np.array(obj["samples"], dtype=np.float64)
    except (ValueError, TypeError):
        raise ParseError(lineno, "samples must be a rectangular array of numbers") from None
    try:
        m = SampleMatrix(arr)
    except InvalidSampleMatrix as exc:
        raise InvariantViolation(lineno, exc.args[0]) from None
    if expected_C is not None and m.C != expected_C:
        raise InvariantViolation(lineno, f"samples have C={m.C}, expected {expected_C}")
    if not 0 <= label < m.C:
        raise InvariantViolation(lineno, f"label {label} outside [0, {m.C})")
    return CaseRecord(obj["case_id"], obj["patient_id"], label, dict(attrs), m)


def load_cohort(path: str | Path, expected_C: int | None = None) -> Cohort:
    """Read, validate and sort a case-level cohort file.

    Without ``expected_C`` the first record fixes the class count. Errors
    name the offending line (1-based).

    Raises:
        ParseError, InvariantViolation, DuplicateCaseId
    """
    records = []
    seen: set[str] = set()
    C = expected_C
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot open cohort file {path}: {exc.strerror}") from None
    with fh:
        for lineno, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            rec = _record(_parse_line(text, lineno), lineno, C)
            C = rec.samples.C
            if rec.case_id in seen:
                raise DuplicateCaseId(lineno, rec.case_id)
            seen.add(rec.case_id)
            records.append(rec)
    if not records:
        raise InputError(f"cohort file {path} contains no records")
    return Cohort(C, UnitLevel.CASE, tuple(records))


def cohort_lines(cohort: Cohort) -> Iterable[bytes]:
    if cohort.unit_level is not UnitLevel.CASE:
        raise InputError("only case-level cohorts can be written as cohort files")
    for rec in cohort.records:
        yield orjson.dumps(
            {
                "case_id": rec.case_id,
                "patient_id": rec.patient_id,
                "label": rec.label,
                "attributes": dict(sorted(rec.attributes.items())),
                "samples": rec.samples.samples,
            },
            option=orjson.OPT_SERIALIZE_NUMPY,
        )


def write_cohort(cohort: Cohort, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        for line in cohort_lines(cohort):
            fh.write(line)
            fh.write(b"\n")
    return path


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def fmt(x) -> str:
    """Render a report cell: ints as-is, reals with 6 significant digits."""
    if x is None:
        return NA
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if not math.isfinite(x):
        return NA
    return f"{x + 0.0:.6g}"


def parse_cell(text: str) -> float | None:
    return None if text == NA else float(text)


def read_label_pairs(path: str | Path) -> tuple[list[int], list[int]]:
    """Read ``pred,label`` pairs, one per line.

    Commas or whitespace separate the two columns. Blank lines, ``#``
    comments and a non-numeric first line (a header) are skipped.
    """
    preds, labels = [], []
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot open {path}: {exc.strerror}") from None
    with fh:
        first = True
        for lineno, text in enumerate(fh, start=1):
            text = text.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.replace(",", " ").split()
            try:
                if len(parts) != 2:
                    raise ValueError
                p, y = int(parts[0]), int(parts[1])
            except ValueError:
                if first and not any(c.isdigit() for c in text):
                    first = False
                    continue
                raise ParseError(lineno, f"expected two integers 'pred,label', got {text!r}")
            first = False
            preds.append(p)
            labels.append(y)
    return preds, labels
