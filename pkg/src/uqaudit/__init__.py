"""Subgroup disparity audits for probabilistic classifiers driven by
Monte Carlo uncertainty scores."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    CaseRecord,
    Cohort,
    PatientRecord,
    SampleMatrix,
    UnitLevel,
    mean_prediction,
    pool_patients,
    predict_class,
)
from .disparity import (  # noqa: E402
    DisparityCurve,
    RejectionPolicy,
    ScoredCohort,
    SubgroupCell,
    disparity_delta,
    performance_curve,
    rejection_order,
    subgroup_performance,
)
from .io import load_cohort, write_cohort  # noqa: E402
from .metrics import (  # noqa: E402
    ConfusionMatrix,
    KappaResult,
    confusion_matrix,
    linear_weighted_kappa,
)
from .synth import GeneratorConfig, SubgroupSpec, generate  # noqa: E402
from .uq import (  # noqa: E402
    UqMetric,
    bhattacharyya,
    naive,
    predictive_entropy,
    predictive_variance,
    score_cohort,
)

__all__ = [
    "CaseRecord",
    "Cohort",
    "ConfusionMatrix",
    "DisparityCurve",
    "GeneratorConfig",
    "KappaResult",
    "PatientRecord",
    "RejectionPolicy",
    "SampleMatrix",
    "ScoredCohort",
    "SubgroupCell",
    "SubgroupSpec",
    "UnitLevel",
    "UqMetric",
    "bhattacharyya",
    "confusion_matrix",
    "disparity_delta",
    "generate",
    "linear_weighted_kappa",
    "load_cohort",
    "mean_prediction",
    "naive",
    "performance_curve",
    "pool_patients",
    "predict_class",
    "predictive_entropy",
    "predictive_variance",
    "rejection_order",
    "score_cohort",
    "subgroup_performance",
    "write_cohort",
]
