import csv
import json
import subprocess
import sys

import pytest

from conftest import gen_config
from uqaudit.cli import EXIT_CONFIG, EXIT_DISPARITY, EXIT_INPUT, main


def read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture
def cohort_file(tmp_path, write_json):
    cfg = write_json(gen_config(n_patients=120, cases_per_patient=2), "gen.json")
    out = tmp_path / "cohort.ndjson"
    assert main(["synth", "--generator-config", str(cfg), "--out", str(out)]) == 0
    return out


def test_synth_deterministic(tmp_path, write_json):
    cfg = write_json(gen_config(n_patients=100, cases_per_patient=2), "gen.json")
    a, b = tmp_path / "a.ndjson", tmp_path / "b.ndjson"
    for out in (a, b):
        assert main(["synth", "--generator-config", str(cfg), "--out", str(out), "--seed", "42"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_text().splitlines()) == 200


def test_synth_bad_weights(tmp_path, write_json, capsys):
    cfg = gen_config()
    cfg["subgroups"][0]["weight"] = 0.3
    path = write_json(cfg, "gen.json")
    assert main(["synth", "--generator-config", str(path), "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert "[synth]" in capsys.readouterr().err


def test_audit_symmetric(tmp_path, write_json):
    cfg = gen_config(n_patients=3000, samples_per_case=30)
    for g in cfg["subgroups"]:
        g.update(concentration=3.0, confusion_skew=0.35)
    path = write_json(cfg, "gen.json")
    out = tmp_path / "report"
    assert main(["audit", "--generator-config", str(path), "--out", str(out)]) == 0
    rows = read(out / "disparity.csv")
    deltas = [float(r[4]) for r in rows[1:]]
    assert len(deltas) == 12 and max(deltas) < 0.06


def test_audit_patient_level_rows(tmp_path, cohort_file):
    out = tmp_path / "report"
    assert main(["audit", "--input", str(cohort_file), "--out", str(out)]) == 0
    summary = read(out / "summary.csv")
    assert summary[-1][0] == "overall" and int(summary[-1][3]) == 120
    meta = json.loads((out / "run.json").read_text())
    assert meta["unit_level"] == "patient" and meta["config"]["input"] == "cohort.ndjson"
    assert "out" not in meta["config"]
    out_case = tmp_path / "case"
    assert main(["audit", "--input", str(cohort_file), "--unit", "case", "--out", str(out_case)]) == 0
    assert int(read(out_case / "summary.csv")[-1][3]) == 240


def test_audit_single_subgroup(tmp_path, write_json, capsys):
    cfg = gen_config(n_patients=50)
    cfg["subgroups"] = [{"attribute": "site", "value": "only", "weight": 1.0}]
    path = write_json(cfg, "gen.json")
    code = main(["audit", "--generator-config", str(path), "--out", str(tmp_path / "r")])
    assert code == EXIT_DISPARITY
    assert "disparity needs at least two" in capsys.readouterr().err


def test_audit_strict(tmp_path, write_json):
    cfg = gen_config(n_patients=40)
    cfg["subgroups"] = [
        {"attribute": "s", "value": "big", "weight": 0.95},
        {"attribute": "s", "value": "tiny", "weight": 0.05},
    ]
    path = write_json(cfg, "gen.json")
    args = ["audit", "--generator-config", str(path), "--grid-stop", "0.9"]
    assert main(args + ["--out", str(tmp_path / "lenient")]) == 0
    assert json.loads((tmp_path / "lenient" / "run.json").read_text())["warnings"]
    assert main(args + ["--strict", "--out", str(tmp_path / "strict")]) == EXIT_DISPARITY


def test_audit_options(tmp_path, cohort_file):
    out = tmp_path / "r"
    code = main([
        "audit", "--input", str(cohort_file), "--out", str(out), "--metrics", "variance,bc",
        "--attributes", "scanner", "--fractions", "0.05,0.2", "--bins", "5", "--grid-step", "0.1",
        "--patient-uq", "case-mean",
    ])
    assert code == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["confusion_bc.csv", "confusion_variance.csv", "curves_scanner_bc.csv",
                     "curves_scanner_variance.csv", "disparity.csv", "run.json", "summary.csv"]
    assert len(read(out / "curves_scanner_bc.csv")) == 1 + 6
    assert [r[3] for r in read(out / "disparity.csv")[1:3]] == ["0.05", "0.2"]


@pytest.mark.parametrize(
    "extra",
    [["--fractions", "0.2,0.1"], ["--fractions", "1.0"], ["--metrics", "naive,foo"], ["--bins", "0"]],
)
def test_audit_config_errors(tmp_path, cohort_file, extra):
    args = ["audit", "--input", str(cohort_file), "--out", str(tmp_path / "r")] + extra
    assert main(args) == EXIT_CONFIG


def test_audit_unknown_attribute(tmp_path, cohort_file):
    args = ["audit", "--input", str(cohort_file), "--out", str(tmp_path / "r"), "--attributes", "race"]
    assert main(args) == EXIT_INPUT


def test_audit_bad_input(tmp_path, capsys):
    bad = tmp_path / "bad.ndjson"
    bad.write_text('{"case_id": "a"}\n')
    assert main(["audit", "--input", str(bad), "--out", str(tmp_path / "r")]) == EXIT_INPUT
    assert "line 1" in capsys.readouterr().err


def test_argparse_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["audit", "--out", "x"])
    assert exc.value.code == EXIT_CONFIG


def test_uq_command(tmp_path):
    lines = []
    for i in range(6):
        lines.append(json.dumps({
            "case_id": f"c{i}", "patient_id": f"p{i}", "label": i % 3,
            "attributes": {"g": "x"}, "samples": [[1.0 if k == i % 3 else 0.0 for k in range(3)]] * 4,
        }))
    path = tmp_path / "onehot.ndjson"
    path.write_text("\n".join(lines) + "\n")
    out = tmp_path / "scores.csv"
    assert main(["uq", "--input", str(path), "--out", str(out), "--unit", "case"]) == 0
    rows = read(out)
    assert rows[0] == ["unit_id", "label", "prediction", "naive", "variance", "entropy", "bc"]
    assert len(rows) == 7
    for r in rows[1:]:
        assert r[3:6] == ["0", "0", "0"] and r[1] == r[2]


def test_uq_ranges(tmp_path, cohort_file):
    out = tmp_path / "scores.csv"
    assert main(["uq", "--input", str(cohort_file), "--out", str(out)]) == 0
    rows = read(out)[1:]
    assert len(rows) == 120
    for r in rows:
        naive, var, ent, bc = map(float, r[3:])
        assert 0 <= naive <= 0.75 and 0 <= var <= 0.25 and 0 <= ent <= 0.3466 and 0 <= bc <= 1


@pytest.mark.parametrize(
    "pairs, lines",
    [
        ("0,0\n1,1\n2,2\n3,3\n", ["kappa: 1"]),
        ("2,2\n2,2\n", ["kappa: NA (undefined"]),
        ("0,0\n1,1\n2,1\n2,2\n", ["kappa: 0.714286", "observed_agreement: 0.875"]),
    ],
)
def test_kappa_command(tmp_path, capsys, pairs, lines):
    path = tmp_path / "pairs.csv"
    path.write_text(pairs)
    assert main(["kappa", "--input", str(path), "--classes", "4" if "3,3" in pairs else "3"]) == 0
    out = capsys.readouterr().out
    for line in lines:
        assert line in out


def test_kappa_parse_error(tmp_path, capsys):
    path = tmp_path / "pairs.csv"
    path.write_text("0,0\n0;1\n")
    assert main(["kappa", "--input", str(path), "--classes", "2"]) == EXIT_INPUT
    assert "line 2" in capsys.readouterr().err


def test_aggregate_command(tmp_path, write_json):
    path = write_json(gen_config(n_patients=100), "gen.json")
    runs = []
    for seed in ("1", "2"):
        out = tmp_path / f"run{seed}"
        assert main(["audit", "--generator-config", str(path), "--seed", seed, "--out", str(out)]) == 0
        runs.append(str(out))
    assert main(["aggregate", *runs, "--out", str(tmp_path / "agg")]) == 0
    assert (tmp_path / "agg" / "summary.csv").exists()


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "uqaudit", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "uqaudit" in res.stdout
