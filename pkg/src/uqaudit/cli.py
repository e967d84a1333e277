"""Command-line interface.

Subcommands::

    uqaudit audit     --input cohort.ndjson --out report/
    uqaudit uq        --input cohort.ndjson --out scores.csv
    uqaudit synth     --generator-config gen.json --out cohort.ndjson
    uqaudit kappa     --input pairs.csv --classes 4
    uqaudit aggregate run1/ run2/ ... --out agg/

Exit status: 0 success, 2 configuration error, 3 input error, 4 disparity
error (single subgroup, or an undefined cell under ``--strict``), 1 other.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .core import Cohort, pool_patients
from .disparity import DEFAULT_FRACTIONS, ScoredCohort, check_fractions, fraction_grid
from .errors import AuditError, ConfigError, DisparityError, InputError
from .io import file_sha256, fmt, load_cohort, read_label_pairs, write_cohort
from .metrics import linear_weighted_kappa
from .report import DEFAULT_CONFUSION_FRACTION, aggregate_runs, build_report, write_report
from .synth import GeneratorConfig, generate
from .uq import ALL_METRICS, DEFAULT_BINS, PATIENT_UQ_MODES, UqMetric, parse_metrics

logger = logging.getLogger("uqaudit")

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_CONFIG = 2
EXIT_INPUT = 3
EXIT_DISPARITY = 4


@dataclass
class RunConfig:
    input: str | None = None
    generator_config: str | None = None
    unit: str = "patient"
    metrics: tuple[UqMetric, ...] = ALL_METRICS
    attributes: tuple[str, ...] = ()  # empty: every attribute in the data
    fractions: tuple[float, ...] = DEFAULT_FRACTIONS
    n_bins: int = DEFAULT_BINS
    grid_step: float = 0.01
    grid_stop: float = 0.5
    confusion_fraction: float = DEFAULT_CONFUSION_FRACTION
    patient_uq: str = "pooled"
    performance: str = "kappa"
    strict: bool = False
    seed: int | None = None
    classes: int | None = None
    out: str | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if (self.input is None) == (self.generator_config is None):
            raise ConfigError("give exactly one of --input or --generator-config")
        if self.unit not in ("case", "patient"):
            raise ConfigError(f"--unit must be 'case' or 'patient', got {self.unit!r}")
        self.metrics = parse_metrics(self.metrics)
        if not self.metrics:
            raise ConfigError("select at least one uncertainty metric")
        self.fractions = check_fractions(self.fractions)
        check_fractions([self.confusion_fraction])
        if self.n_bins < 1:
            raise ConfigError(f"--bins must be >= 1, got {self.n_bins}")
        if self.patient_uq not in PATIENT_UQ_MODES:
            raise ConfigError(f"--patient-uq must be one of {PATIENT_UQ_MODES}")
        if self.performance not in ("kappa", "accuracy"):
            raise ConfigError(f"unknown performance metric {self.performance!r}")

    @property
    def grid(self) -> tuple[float, ...]:
        return fraction_grid(self.grid_step, self.grid_stop)

    def describe(self) -> dict:
        """Run metadata: everything that determines the output, minus paths."""
        d = asdict(self)
        d.pop("out")
        d["metrics"] = [m.value for m in self.metrics]
        d["attributes"] = list(self.attributes)
        d["fractions"] = list(self.fractions)
        if self.input is not None:
            d["input"] = Path(self.input).name
            d["input_sha256"] = file_sha256(self.input)
        if self.generator_config is not None:
            gen = GeneratorConfig.from_file(self.generator_config)
            if self.seed is not None:
                gen = gen.with_seed(self.seed)
            d["generator_config"] = gen.to_dict()
        return d


def load_units(config: RunConfig) -> Cohort:
    if config.input is not None:
        cohort = load_cohort(config.input, config.classes)
    else:
        gen = GeneratorConfig.from_file(config.generator_config)
        if config.seed is not None:
            gen = gen.with_seed(config.seed)
        cohort = generate(gen)
    return pool_patients(cohort) if config.unit == "patient" else cohort


def run_audit(config: RunConfig):
    meta = {"config": config.describe()}
    cohort = load_units(config)
    attributes = list(config.attributes) or cohort.attribute_names()
    if not attributes:
        raise InputError("the cohort has no attributes to audit")
    scored = ScoredCohort.from_cohort(cohort, config.metrics, config.n_bins, config.patient_uq)
    for attribute in attributes:
        scored.subgroups(attribute)
    meta.update(
        unit_level=cohort.unit_level.value,
        n_units=len(cohort),
        class_count=cohort.class_count,
        audited_attributes=attributes,
    )
    return build_report(
        scored,
        attributes,
        config.metrics,
        config.fractions,
        config.grid,
        config.confusion_fraction,
        config.strict,
        config.performance,
        meta,
    )


def cmd_audit(config: RunConfig) -> int:
    if config.out is None:
        raise ConfigError("--out is required")
    report = run_audit(config)
    write_report(report, config.out)
    if report.warnings:
        logger.warning("%d warning(s) recorded in run.json", len(report.warnings))
    return EXIT_OK


def cmd_uq(config: RunConfig) -> int:
    if config.out is None:
        raise ConfigError("--out is required")
    cohort = load_units(config)
    scored = ScoredCohort.from_cohort(cohort, config.metrics, config.n_bins, config.patient_uq)
    out = Path(config.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    cols = [m.value for m in config.metrics]
    lines = [",".join(["unit_id", "label", "prediction"] + cols)]
    for i, uid in enumerate(scored.unit_ids):
        row = [uid, scored.labels[i], scored.predictions[i]]
        row += [scored.scores[m][i] for m in config.metrics]
        lines.append(",".join(fmt(x) for x in row))
    out.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return EXIT_OK


def cmd_synth(generator_config: str, out: str, seed: int | None = None) -> int:
    gen = GeneratorConfig.from_file(generator_config)
    if seed is not None:
        gen = gen.with_seed(seed)
    write_cohort(generate(gen), out)
    return EXIT_OK


def cmd_kappa(path: str, classes: int, stream=None) -> int:
    stream = stream or sys.stdout
    preds, labels = read_label_pairs(path)
    res = linear_weighted_kappa(preds, labels, classes)
    if res.defined:
        print(f"kappa: {fmt(res.kappa)}", file=stream)
    else:
        print(
            "kappa: NA (undefined: both columns put every unit in the same single "
            "class, so chance agreement is 1)",
            file=stream,
        )
    print(f"n_units: {res.n_units}", file=stream)
    print(f"observed_agreement: {fmt(res.observed_agreement)}", file=stream)
    print(f"chance_agreement: {fmt(res.chance_agreement)}", file=stream)
    return EXIT_OK


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _names(text: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in text.split(",") if x.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uqaudit",
        description="Audit subgroup disparity of a classifier under uncertainty-based rejection.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def data_args(p: argparse.ArgumentParser) -> None:
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--input", help="cohort file (one JSON record per line)")
        src.add_argument("--generator-config", help="synthesize the cohort from this JSON config")
        p.add_argument("--seed", type=int, help="override the generator seed")
        p.add_argument("--unit", choices=("case", "patient"), default="patient")
        p.add_argument("--classes", type=int, help="expected class count C")
        p.add_argument(
            "--metrics",
            type=_names,
            default=tuple(m.value for m in ALL_METRICS),
            help="comma list from naive,variance,entropy,bc",
        )
        p.add_argument("--bins", type=int, default=DEFAULT_BINS, help="histogram bins for bc")
        p.add_argument(
            "--patient-uq",
            choices=PATIENT_UQ_MODES,
            default="pooled",
            help="patient scores from pooled samples or the mean of per-case scores",
        )
        p.add_argument("--out", required=True)

    audit = sub.add_parser("audit", help="full disparity audit")
    data_args(audit)
    audit.add_argument("--attributes", type=_names, default=(), help="comma list (default: all)")
    audit.add_argument("--fractions", type=_floats, default=DEFAULT_FRACTIONS)
    audit.add_argument("--grid-step", type=float, default=0.01)
    audit.add_argument("--grid-stop", type=float, default=0.5)
    audit.add_argument("--confusion-fraction", type=float, default=DEFAULT_CONFUSION_FRACTION)
    audit.add_argument("--performance", choices=("kappa", "accuracy"), default="kappa")
    audit.add_argument("--strict", action="store_true", help="undefined cells are errors")

    uq = sub.add_parser("uq", help="per-unit uncertainty score table")
    data_args(uq)

    synth = sub.add_parser("synth", help="write a synthetic cohort file")
    synth.add_argument("--generator-config", required=True)
    synth.add_argument("--seed", type=int)
    synth.add_argument("--out", required=True)

    kappa = sub.add_parser("kappa", help="linearly weighted kappa of pred,label pairs")
    kappa.add_argument("--input", required=True)
    kappa.add_argument("--classes", type=int, required=True)

    agg = sub.add_parser("aggregate", help="mean/std over repeated run directories")
    agg.add_argument("runs", nargs="+")
    agg.add_argument("--out", required=True)
    return parser


def _run_config(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        input=args.input,
        generator_config=args.generator_config,
        unit=args.unit,
        metrics=args.metrics,
        attributes=getattr(args, "attributes", ()),
        fractions=getattr(args, "fractions", DEFAULT_FRACTIONS),
        n_bins=args.bins,
        grid_step=getattr(args, "grid_step", 0.01),
        grid_stop=getattr(args, "grid_stop", 0.5),
        confusion_fraction=getattr(args, "confusion_fraction", DEFAULT_CONFUSION_FRACTION),
        patient_uq=args.patient_uq,
        performance=getattr(args, "performance", "kappa"),
        strict=getattr(args, "strict", False),
        seed=args.seed,
        classes=args.classes,
        out=args.out,
    )


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="uqaudit: %(levelname)s: %(message)s",
    )
    try:
        if args.command == "audit":
            return cmd_audit(_run_config(args))
        if args.command == "uq":
            return cmd_uq(_run_config(args))
        if args.command == "synth":
            return cmd_synth(args.generator_config, args.out, args.seed)
        if args.command == "kappa":
            return cmd_kappa(args.input, args.classes)
        if args.command == "aggregate":
            aggregate_runs(args.runs, args.out)
            return EXIT_OK
    except ConfigError as exc:
        print(f"uqaudit: config error {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DisparityError as exc:
        print(f"uqaudit: disparity error {exc}", file=sys.stderr)
        return EXIT_DISPARITY
    except InputError as exc:
        print(f"uqaudit: input error {exc}", file=sys.stderr)
        return EXIT_INPUT
    except AuditError as exc:
        print(f"uqaudit: error {exc}", file=sys.stderr)
        return EXIT_OTHER
    return EXIT_OTHER
