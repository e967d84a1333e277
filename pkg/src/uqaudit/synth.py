"""Seeded synthetic cohorts of MC softmax samples.

Stands in for a trained model. Each patient draws one value per audited
attribute and a true label. Each of the patient's cases gets a target
vector (``1 - skew`` on the true class, the rest split over the ordinal
neighbours), a case-level centre drawn from a Dirichlet around the target,
and ``T`` MC rows drawn from a Dirichlet around that centre. Concentration
scales both Dirichlets, so it controls both how often the averaged
prediction is wrong and how dispersed the MC rows are.

When a patient belongs to several subgroups (one per attribute) their
settings combine: skews as independent corruptions,
``1 - prod(1 - skew)``, and concentrations by geometric mean.
"""

from __future__ import annotations

import json
from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .core import CaseRecord, Cohort, SampleMatrix, UnitLevel
from .errors import InvalidConfig

WEIGHT_TOL = 1e-9


@dataclass(frozen=True)
class SubgroupSpec:
    attribute: str
    value: str
    weight: float
    concentration: float = 50.0
    confusion_skew: float = 0.1


@dataclass(frozen=True)
class GeneratorConfig:
    """Generator settings.

    ``cases_per_patient`` is either a fixed count or a mapping from count to
    probability. ``noise_floor`` is added to every Dirichlet parameter so
    classes with zero target mass still get (tiny) samples.
    """

    subgroups: tuple[SubgroupSpec, ...]
    class_count: int = 4
    class_prior: tuple[float, ...] | None = None
    n_patients: int = 1000
    samples_per_case: int = 100
    cases_per_patient: int | Mapping[int, float] = 1
    seed: int = 0
    noise_floor: float = 0.01

    def __post_init__(self) -> None:
        C = self.class_count
        if not isinstance(C, int) or C < 2:
            raise InvalidConfig(f"class_count must be an integer >= 2, got {C!r}")
        prior = self.class_prior
        prior = tuple(float(p) for p in (prior if prior is not None else [1.0 / C] * C))
        if len(prior) != C or min(prior) < 0 or abs(sum(prior) - 1.0) > WEIGHT_TOL:
            raise InvalidConfig(f"class_prior must be {C} non-negative values summing to 1")
        object.__setattr__(self, "class_prior", prior)
        if not isinstance(self.n_patients, int) or self.n_patients < 1:
            raise InvalidConfig(f"n_patients must be a positive integer, got {self.n_patients!r}")
        if not isinstance(self.samples_per_case, int) or self.samples_per_case < 1:
            raise InvalidConfig(f"samples_per_case must be >= 1, got {self.samples_per_case!r}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise InvalidConfig(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if not self.noise_floor > 0:
            raise InvalidConfig("noise_floor must be positive")
        cpp = self.cases_per_patient
        if isinstance(cpp, Mapping):
            dist = {int(k): float(v) for k, v in cpp.items()}
            if not dist or min(dist) < 1 or min(dist.values()) < 0:
                raise InvalidConfig("cases_per_patient counts must be >= 1 with weights >= 0")
            if abs(sum(dist.values()) - 1.0) > WEIGHT_TOL:
                raise InvalidConfig("cases_per_patient probabilities must sum to 1")
            object.__setattr__(self, "cases_per_patient", dict(sorted(dist.items())))
        elif not isinstance(cpp, int) or cpp < 1:
            raise InvalidConfig(f"cases_per_patient must be >= 1, got {cpp!r}")
        subgroups = tuple(
            s if isinstance(s, SubgroupSpec) else SubgroupSpec(**s) for s in self.subgroups
        )
        object.__setattr__(self, "subgroups", subgroups)
        if not subgroups:
            raise InvalidConfig("at least one subgroup spec is required")
        totals: dict[str, float] = {}
        seen = set()
        for s in subgroups:
            if not s.attribute or not s.value:
                raise InvalidConfig("subgroup attribute and value must be non-empty strings")
            if (s.attribute, s.value) in seen:
                raise InvalidConfig(f"duplicate subgroup {s.attribute}={s.value}")
            seen.add((s.attribute, s.value))
            if s.weight < 0:
                raise InvalidConfig(f"subgroup {s.attribute}={s.value} has negative weight")
            if not s.concentration > 0:
                raise InvalidConfig(f"subgroup {s.attribute}={s.value}: concentration must be > 0")
            if not 0.0 <= s.confusion_skew <= 1.0:
                raise InvalidConfig(
                    f"subgroup {s.attribute}={s.value}: confusion_skew must be in [0, 1]"
                )
            totals[s.attribute] = totals.get(s.attribute, 0.0) + s.weight
        for attr, total in totals.items():
            if abs(total - 1.0) > WEIGHT_TOL:
                raise InvalidConfig(f"weights for attribute {attr!r} sum to {total:.12g}, not 1")

    @property
    def attributes(self) -> list[str]:
        out: list[str] = []
        for s in self.subgroups:
            if s.attribute not in out:
                out.append(s.attribute)
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "GeneratorConfig":
        data = dict(data)
        try:
            data["subgroups"] = tuple(SubgroupSpec(**s) for s in data.get("subgroups", ()))
            if isinstance(data.get("cases_per_patient"), Mapping):
                data["cases_per_patient"] = {
                    int(k): v for k, v in data["cases_per_patient"].items()
                }
            if data.get("class_prior") is not None:
                data["class_prior"] = tuple(data["class_prior"])
            return cls(**data)
        except TypeError as exc:
            raise InvalidConfig(f"bad generator config: {exc}") from None

    @classmethod
    def from_file(cls, path: str | Path) -> "GeneratorConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidConfig(f"cannot read generator config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise InvalidConfig("generator config must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["subgroups"] = [asdict(s) for s in self.subgroups]
        d["class_prior"] = list(self.class_prior)
        if isinstance(self.cases_per_patient, Mapping):
            d["cases_per_patient"] = {str(k): v for k, v in self.cases_per_patient.items()}
        return d

    def with_seed(self, seed: int) -> "GeneratorConfig":
        d = self.to_dict()
        d["seed"] = seed
        return GeneratorConfig.from_dict(d)


def target_vector(label: int, skew: float, C: int) -> np.ndarray:
    target = np.zeros(C)
    target[label] = 1.0 - skew
    neighbours = [k for k in (label - 1, label + 1) if 0 <= k < C]
    target[neighbours] += skew / len(neighbours)
    return target


def _draw(rng: np.random.Generator, cum: np.ndarray) -> int:
    return min(int(np.searchsorted(cum, rng.random(), side="right")), len(cum) - 1)


def generate(config: GeneratorConfig) -> Cohort:
    """Build a case-level cohort; identical config and seed give identical data.

    Patient ``i`` draws from its own stream ``SeedSequence(seed,
    spawn_key=(i,))``, so any patient can be regenerated independently.
    """
    C = config.class_count
    T = config.samples_per_case
    attrs = config.attributes
    groups = {a: [s for s in config.subgroups if s.attribute == a] for a in attrs}
    cums = {a: np.cumsum([s.weight for s in groups[a]]) for a in attrs}
    prior_cum = np.cumsum(config.class_prior)
    cpp = config.cases_per_patient
    if isinstance(cpp, Mapping):
        counts = list(cpp)
        count_cum = np.cumsum(list(cpp.values()))
    width = len(str(config.n_patients))
    floor = config.noise_floor

    records = []
    for i in range(config.n_patients):
        rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(i,)))
        specs = [groups[a][_draw(rng, cums[a])] for a in attrs]
        label = _draw(rng, prior_cum)
        n_cases = counts[_draw(rng, count_cum)] if isinstance(cpp, Mapping) else cpp
        skew = 1.0 - float(np.prod([1.0 - s.confusion_skew for s in specs]))
        conc = float(np.exp(np.mean(np.log([s.concentration for s in specs]))))
        target = target_vector(label, skew, C)
        pid = f"P{i:0{width}d}"
        attributes = {s.attribute: s.value for s in specs}
        for j in range(n_cases):
            centre = rng.dirichlet(conc * target + floor)
            rows = rng.dirichlet(conc * centre + floor, size=T)
            records.append(
                CaseRecord(
                    case_id=f"{pid}-C{j + 1:02d}",
                    patient_id=pid,
                    label=label,
                    attributes=dict(attributes),
                    samples=SampleMatrix(rows),
                )
            )
    return Cohort(C, UnitLevel.CASE, tuple(records))
