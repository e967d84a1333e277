import json
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from uqaudit.core import CaseRecord, Cohort, SampleMatrix, UnitLevel
from uqaudit.disparity import ScoredCohort
from uqaudit.uq import UqMetric, UqScores


def make_case(case_id, label, attrs=None, rows=None, patient_id=None, C=2):
    rows = rows if rows is not None else [[1.0 / C] * C]
    return CaseRecord(case_id, patient_id or case_id, label, dict(attrs or {}), SampleMatrix(rows))


def build_scored(labels, preds, attributes, scores=None, C=None):
    """ScoredCohort with hand-chosen predictions and scores.

    ``attributes`` maps attribute name to a per-unit value list; ``scores``
    maps metric name to per-unit scores (default: all zero).
    """
    n = len(labels)
    C = C or max(2, max(labels) + 1, max(preds) + 1)
    ids = [f"u{i:05d}" for i in range(n)]
    records = [
        make_case(ids[i], labels[i], {a: v[i] for a, v in attributes.items()}, C=C)
        for i in range(n)
    ]
    cohort = Cohort(C, UnitLevel.CASE, tuple(records))
    scores = scores or {"naive": [0.0] * n}
    uq = UqScores(
        tuple(ids),
        np.asarray(preds, dtype=np.int64),
        {UqMetric(m): np.asarray(s, dtype=np.float64) for m, s in scores.items()},
    )
    return ScoredCohort(cohort, uq)


def gen_config(**overrides):
    cfg = {
        "class_count": 4,
        "class_prior": [0.1, 0.45, 0.35, 0.1],
        "n_patients": 200,
        "samples_per_case": 20,
        "cases_per_patient": 1,
        "seed": 7,
        "subgroups": [
            {"attribute": "scanner", "value": "a", "weight": 0.5, "concentration": 20.0,
             "confusion_skew": 0.1},
            {"attribute": "scanner", "value": "b", "weight": 0.5, "concentration": 20.0,
             "confusion_skew": 0.1},
        ],
    }
    cfg.update(overrides)
    return cfg


@pytest.fixture
def write_json(tmp_path):
    def _write(obj, name="config.json"):
        path = tmp_path / name
        path.write_text(json.dumps(obj))
        return path

    return _write


# -- acceptance summary --------------------------------------------------------

_ACCEPTANCE = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        _ACCEPTANCE.append((marker.args[0], rep.outcome.upper(), rep.duration))


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(name): exit criterion")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, duration in _ACCEPTANCE:
        status = "PASS" if outcome == "PASSED" else "FAIL"
        terminalreporter.write_line(f"{status}  {name}  ({duration:.2f} s)")
