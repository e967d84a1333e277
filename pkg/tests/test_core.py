import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_case
from uqaudit.core import (
    Cohort,
    SampleMatrix,
    UnitLevel,
    majority_label,
    mean_prediction,
    pool_patients,
    predict_class,
)
from uqaudit.errors import ConflictingAttributes, InputError, InvalidSampleMatrix


@st.composite
def sample_arrays(draw, max_t=30, max_c=6):
    t = draw(st.integers(1, max_t))
    c = draw(st.integers(2, max_c))
    seed = draw(st.integers(0, 2**32 - 1))
    alpha = draw(st.sampled_from([0.05, 0.5, 1.0, 10.0]))
    return np.random.default_rng(seed).dirichlet([alpha] * c, size=t)


class TestSampleMatrix:
    def test_shape_properties(self):
        m = SampleMatrix([[0.2, 0.8], [0.5, 0.5], [1.0, 0.0]])
        assert (m.T, m.C) == (3, 2)
        assert not m.samples.flags.writeable

    @pytest.mark.parametrize(
        "rows",
        [
            [[0.5, 0.4]],  # sums to 0.9
            [[1.0]],  # C < 2
            [[-0.1, 1.1]],
            [[np.nan, 1.0]],
            [0.5, 0.5],  # not a matrix
            np.empty((0, 3)),
        ],
    )
    def test_rejects_invalid(self, rows):
        with pytest.raises(InvalidSampleMatrix):
            SampleMatrix(rows)

    def test_renormalizes_within_tolerance(self):
        m = SampleMatrix([[0.5, 0.5 + 5e-7]])
        assert m.samples.sum() == pytest.approx(1.0, abs=1e-15)
        assert m.samples[0, 0] < 0.5

    def test_exact_rows_untouched(self):
        row = np.random.default_rng(1).dirichlet([1, 1, 1])
        m = SampleMatrix([row])
        assert np.array_equal(m.samples[0], row)

    def test_normalization_is_idempotent(self):
        m = SampleMatrix([[0.3, 0.7 - 4e-7], [0.2, 0.8 + 9e-7]])
        again = SampleMatrix(m.samples)
        assert again == m


class TestMeanPrediction:
    def test_identity(self):
        np.testing.assert_allclose(mean_prediction(SampleMatrix([[0.1, 0.9]])), [0.1, 0.9])

    def test_symmetry(self):
        np.testing.assert_allclose(mean_prediction(SampleMatrix([[1, 0], [0, 1]])), [0.5, 0.5])

    def test_three_rows(self):
        m = SampleMatrix([[0.6, 0.4], [0.2, 0.8], [0.4, 0.6]])
        np.testing.assert_allclose(mean_prediction(m), [0.4, 0.6], atol=1e-15)

    @given(sample_arrays())
    @settings(max_examples=100)
    def test_output_is_probability_vector(self, arr):
        mean = mean_prediction(SampleMatrix(arr))
        assert np.all(mean >= 0)
        assert abs(mean.sum() - 1.0) < 1e-6


class TestPredictClass:
    @pytest.mark.parametrize(
        "rows, expected",
        [([[0.1, 0.9]], 1), ([[0.5, 0.5]], 0), ([[0.2, 0.5, 0.3]], 1), ([[1, 0], [0, 1]], 0)],
    )
    def test_examples(self, rows, expected):
        assert predict_class(SampleMatrix(rows)) == expected

    @given(sample_arrays(), st.randoms(use_true_random=False))
    @settings(max_examples=100)
    def test_row_permutation_invariant(self, arr, rnd):
        perm = list(range(len(arr)))
        rnd.shuffle(perm)
        assert predict_class(SampleMatrix(arr)) == predict_class(SampleMatrix(arr[perm]))


class TestMajorityLabel:
    @pytest.mark.parametrize(
        "labels, expected", [([2], 2), ([2, 3], 3), ([1, 1, 3], 1), ([0, 3, 3, 0, 2], 3)]
    )
    def test_tie_goes_high(self, labels, expected):
        assert majority_label(labels) == expected


def _cohort(records, C=2):
    return Cohort(C, UnitLevel.CASE, tuple(records))


class TestCohort:
    def test_sorted_by_unit_id(self):
        c = _cohort([make_case("b", 0), make_case("a", 1), make_case("c", 0)])
        assert c.unit_ids == ["a", "b", "c"]

    def test_duplicate_ids(self):
        with pytest.raises(InputError):
            _cohort([make_case("a", 0), make_case("a", 1)])

    def test_class_count_mismatch(self):
        with pytest.raises(InputError):
            _cohort([make_case("a", 0, C=3)], C=2)

    def test_label_out_of_range(self):
        with pytest.raises(InputError):
            make_case("a", 2, C=2)

    @pytest.mark.parametrize("attrs", [{"": "x"}, {"race": ""}, {"race": 3}])
    def test_attribute_strings(self, attrs):
        with pytest.raises(InputError):
            make_case("a", 0, attrs)


class TestPoolPatients:
    def test_single_case_identity(self):
        case = make_case("c1", 1, {"race": "x"}, [[0.3, 0.7], [0.4, 0.6]], patient_id="p1")
        pooled = pool_patients(_cohort([case]))
        assert pooled.unit_level is UnitLevel.PATIENT
        (p,) = pooled.records
        assert p.patient_id == "p1" and p.label == 1 and p.attributes == {"race": "x"}
        assert p.samples == case.samples

    def test_concatenation(self):
        rng = np.random.default_rng(0)
        a, b = rng.dirichlet([1, 1, 1, 1], size=100), rng.dirichlet([2, 1, 1, 1], size=100)
        cases = [
            make_case("c1", 2, rows=a, patient_id="p", C=4),
            make_case("c2", 3, rows=b, patient_id="p", C=4),
        ]
        (p,) = pool_patients(_cohort(cases, C=4)).records
        assert p.samples.T == p.T == 200
        assert p.label == 3
        np.testing.assert_allclose(mean_prediction(p.samples), np.vstack([a, b]).mean(axis=0))
        per_case = (mean_prediction(cases[0].samples) + mean_prediction(cases[1].samples)) / 2
        np.testing.assert_allclose(mean_prediction(p.samples), per_case, atol=1e-15)

    def test_conflicting_attributes(self):
        cases = [
            make_case("c1", 0, {"scanner": "ads"}, patient_id="p"),
            make_case("c2", 0, {"scanner": "other"}, patient_id="p"),
        ]
        with pytest.raises(ConflictingAttributes) as exc:
            pool_patients(_cohort(cases))
        assert exc.value.patient_id == "p"

    def test_requires_case_level(self):
        pooled = pool_patients(_cohort([make_case("c1", 0)]))
        with pytest.raises(InputError):
            pool_patients(pooled)

    @given(st.lists(st.tuples(st.integers(0, 4), st.integers(1, 5)), min_size=1, max_size=20))
    @settings(max_examples=50)
    def test_row_count_preserved_and_deterministic(self, spec):
        cases = [
            make_case(f"c{i:02d}", 0, rows=[[0.5, 0.5]] * t, patient_id=f"p{pid}")
            for i, (pid, t) in enumerate(spec)
        ]
        cohort = _cohort(cases)
        first, second = pool_patients(cohort), pool_patients(cohort)
        assert sum(p.T for p in first.records) == sum(t for _, t in spec)
        assert first.unit_ids == second.unit_ids == sorted({f"p{pid}" for pid, _ in spec})
        assert [p.case_ids for p in first.records] == [p.case_ids for p in second.records]
