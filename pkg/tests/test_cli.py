import io
import json
import sys

import numpy as np
import pytest

from localf2.cli import main


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def write_csv(path, columns):
    names = list(columns)
    rows = zip(*(columns[n] for n in names))
    path.write_text(",".join(names) + "\n" + "".join(",".join(repr(float(v)) for v in r) + "\n" for r in rows))
    return str(path)


@pytest.fixture
def data(tmp_path):
    rng = np.random.default_rng(1)
    n = 120
    x1, x2 = rng.standard_normal((2, n))
    g = np.repeat(np.arange(12), 10)
    y = 0.5 * x1 + 0.4 * x2 + rng.standard_normal(12)[g] + rng.standard_normal(n)
    return write_csv(tmp_path / "d.csv", {"y": y, "x1": x1, "x2": x2, "g": g})


MODEL = ("--response", "y", "--focal", "x2", "--controls", "x1")


def test_analyze_json(data):
    code, out, err = run("analyze", "--data", data, *MODEL)
    assert code == 0, err
    doc = json.loads(out)
    assert doc["schema"] == "localf2.report/1"
    assert doc["variant"] == "ols"
    body = doc["body"]
    for key in ("r2_A", "r2_AB", "f2_global", "f2_local", "label", "F", "p", "df", "intervals", "adj_r2"):
        assert key in body
    assert isinstance(body["p"], str) and "e" in body["p"]
    assert float(body["p"]) == pytest.approx(float(doc["checklist"]["exact_p"]))
    assert doc["metadata"]["data_digest"].startswith("sha256:")
    assert doc["metadata"]["timestamp"] is None


def test_markdown_matches_json(data):
    _, js, _ = run("analyze", "--data", data, *MODEL)
    code, md, _ = run("analyze", "--data", data, *MODEL, "--format", "md")
    assert code == 0
    f2 = json.loads(js)["body"]["f2_local"]
    assert f"| f2_local | {f2!r} |" in md
    assert "## Reporting checklist" in md


def test_json_round_trip(data):
    _, out, _ = run("analyze", "--data", data, *MODEL)
    doc = json.loads(out)
    assert json.dumps(doc, indent=2, ensure_ascii=False) + "\n" == out


def test_unknown_column(data):
    code, out, err = run("analyze", "--data", data, "--response", "y", "--focal", "nope")
    assert code == 2 and out == ""
    assert "--focal" in err and "'nope'" in err


def test_missing_file(tmp_path):
    code, _, err = run("analyze", "--data", str(tmp_path / "none.csv"), *MODEL)
    assert code == 2 and "cannot read" in err


def test_usage_error():
    code, _, _ = run("analyze", "--data")
    assert code == 2


def test_rank_deficient_exit_3(tmp_path):
    rng = np.random.default_rng(2)
    x1 = rng.standard_normal(40)
    path = write_csv(tmp_path / "r.csv", {"y": rng.standard_normal(40), "x1": x1, "x2": 2 * x1 + 1})
    code, _, err = run("analyze", "--data", path, *MODEL)
    assert code == 3 and "x2" in err


def test_denominator_guard_exit_3(tmp_path):
    rng = np.random.default_rng(3)
    x1, x2 = rng.standard_normal((2, 40))
    path = write_csv(tmp_path / "p.csv", {"y": x1 + 2 * x2, "x1": x1, "x2": x2})
    code, _, err = run("analyze", "--data", path, *MODEL)
    assert code == 3 and "1e-12" in err


def test_drop_missing_warning(tmp_path, data):
    text = open(data).read().splitlines()
    text[3] = "NA," + text[3].split(",", 1)[1]
    path = tmp_path / "m.csv"
    path.write_text("\n".join(text) + "\n")
    code, _, err = run("analyze", "--data", str(path), *MODEL)
    assert code == 2
    code, out, _ = run("analyze", "--data", str(path), "--drop-missing", *MODEL)
    assert code == 0
    doc = json.loads(out)
    assert "1 row(s) with missing values removed" in doc["warnings"]
    assert doc["body"]["n"] == 119


def test_analyze_with_bootstrap(data):
    code, _, err = run("analyze", "--data", data, *MODEL, "--bootstrap", "300")
    assert code == 2 and "--seed" in err
    code, out, _ = run("analyze", "--data", data, *MODEL, "--bootstrap", "300", "--seed", "4")
    lo, hi = json.loads(out)["body"]["ci_f2_local"]
    assert lo <= json.loads(out)["body"]["f2_local"] <= hi


def test_bootstrap_byte_identical(data):
    args = ("bootstrap", "--data", data, *MODEL, "--replicates", "300", "--seed", "11")
    first = run(*args)
    assert first[0] == 0
    assert run(*args) == first
    assert run(*args, "--workers", "3") == first


def test_lmm(data):
    code, out, err = run("lmm", "--data", data, *MODEL, "--group", "g")
    assert code == 0, err
    doc = json.loads(out)
    assert doc["variant"] == "multilevel"
    assert doc["body"]["pseudo_r2_definition"] == "total-variance"
    code, _, err = run("lmm", "--data", data, *MODEL, "--group", "school")
    assert code == 2 and "--group" in err


def test_blackbox_ols(data):
    code, out, err = run("blackbox", "--data", data, "--response", "y", "--predictors", "x1,x2", "--focal", "x2", "--oracle-ols", "--seed", "1")
    assert code == 0, err
    body = json.loads(out)["body"]
    assert body["f2_local"] > 0 and body["p"] == "not applicable"


def test_blackbox_echo_mean(data):
    cmd = f"{sys.executable} -m localf2.oracles.echo_mean"
    code, out, err = run("blackbox", "--data", data, "--response", "y", "--predictors", "x1,x2", "--focal", "x1", "--oracle-cmd", cmd, "--seed", "1", "--repeats", "5")
    assert code == 0, err
    assert json.loads(out)["body"]["f2_local"] == 0.0


def test_blackbox_handshake_exit_4(data):
    code, _, err = run("blackbox", "--data", data, "--response", "y", "--focal", "x1", "--oracle-cmd", "echo hello", "--seed", "1")
    assert code == 4 and "'hello'" in err


def test_mc_study_csv():
    code, out, err = run("mc-study", "--rho2-a", "0.1", "--rho2-ab", "0.2", "--n-grid", "30,60", "--reps", "100", "--seed", "3")
    assert code == 0, err
    lines = out.splitlines()
    assert lines[0].startswith("estimator,n,mean")
    assert len(lines) == 1 + 8


def test_mc_study_json_and_md():
    args = ("mc-study", "--rho2-ab", "0.2", "--n-grid", "30", "--reps", "100", "--seed", "3")
    code, out, _ = run(*args, "--format", "json")
    assert code == 0 and json.loads(out)["kind"] == "stability"
    code, out, _ = run(*args, "--format", "md")
    assert code == 0 and "## Sampling behaviour" in out


def test_mc_study_bad_noise():
    code, _, _ = run("mc-study", "--beta", "0.5,0.5", "--noise-var", "0", "--n-grid", "30", "--reps", "100", "--seed", "1")
    assert code == 2


def test_timestamp_literal(data):
    _, out, _ = run("analyze", "--data", data, *MODEL, "--timestamp", "2026-01-01")
    assert json.loads(out)["metadata"]["timestamp"] == "2026-01-01"


@pytest.mark.parametrize("fmt", ["json", "md"])
def test_no_threshold_language_and_unique_warnings(data, fmt):
    for args in (
        ("analyze", "--data", data, *MODEL),
        ("lmm", "--data", data, *MODEL, "--group", "g"),
        ("blackbox", "--data", data, "--response", "y", "--focal", "x2", "--oracle-ols", "--seed", "1", "--predictors", "x1,x2"),
    ):
        code, out, _ = run(*args, "--format", fmt)
        assert code == 0
        assert "p <" not in out and "p >" not in out
        if fmt == "json":
            w = json.loads(out)["warnings"]
            assert len(w) == len(set(w))
