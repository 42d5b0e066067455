import json

import numpy as np
import pytest

from sojourn_mc import cli
from sojourn_mc import covariance as cov
from sojourn_mc.berman import BermanTable
from sojourn_mc.errors import SchemaError


@pytest.fixture(scope="module")
def table_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("table")
    rc = cli.main(["estimate-constant", "--alpha", "1", "--S", "4",
                   "--step", "0.01", "--R", "2000", "--x-grid", "0,0.5",
                   "--seed", "3", "--out", str(d)])
    assert rc == 0
    return d


def read_manifest(out_dir):
    with open(out_dir / "manifest.json", "r", encoding="utf-8") as fh:
        return json.load(fh)


def test_estimate_constant_outputs(table_dir):
    tab = BermanTable.read_json(table_dir / "berman_table.json")
    assert tab.alpha == 1.0 and tab.replications == 2000
    man = read_manifest(table_dir)
    assert man["schema_version"] == 1
    assert man["command"] == "estimate-constant"
    assert man["seed"] == 3
    assert man["outputs"] == ["berman_table.json"]
    assert man["version"].startswith("sojourn-mc ")
    assert isinstance(man["wall_clock_seconds"], float)


def test_predict_writes_csv(table_dir, tmp_path):
    out = tmp_path / "pred"
    rc = cli.main(["predict", "--model", "frac_ou:alpha=1",
                   "--horizon", "pareto:lambda=1.5",
                   "--berman-table", str(table_dir / "berman_table.json"),
                   "--u-grid", "2,3", "--x-grid", "0,0.5",
                   "--out", str(out)])
    assert rc == 0
    lines = (out / "predictions.csv").read_text().strip().split("\n")
    assert lines[0].startswith("scenario,alpha,family,u,x,predicted_tail")
    assert len(lines) == 1 + 2 * 2
    man = read_manifest(out)
    assert man["command"] == "predict" and man["seed"] is None
    assert man["outputs"] == ["predictions.csv"]


def write_compare_config(path, table_dir, seed=5):
    cfg = {
        "schema_version": 1,
        "model": "frac_ou:alpha=1",
        "horizon": "deterministic:t0=1",
        "berman_table": str(table_dir / "berman_table.json"),
        "u_grid": [2.0],
        "x_grid": [0.0, 0.5],
        "replications": 1000,
        "seed": seed,
    }
    path.write_text(json.dumps(cfg))
    return path


def test_compare_end_to_end_and_reruns_identical(table_dir, tmp_path):
    cfg = write_compare_config(tmp_path / "cfg.json", table_dir)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["compare", "--config", str(cfg), "--out", str(out_a)]) == 0
    assert cli.main(["compare", "--config", str(cfg), "--out", str(out_b)]) == 0

    rep_a = (out_a / "report.csv").read_bytes()
    assert rep_a == (out_b / "report.csv").read_bytes()
    assert (out_a / "report_diagnostics.json").read_bytes() == \
        (out_b / "report_diagnostics.json").read_bytes()

    lines = rep_a.decode().strip().split("\n")
    assert lines[0] == ("scenario,alpha,family,u,x,empirical,se,predicted,"
                        "ratio,flags")
    assert len(lines) == 3

    man_a, man_b = read_manifest(out_a), read_manifest(out_b)
    assert man_a["config_path"] == str(cfg)
    assert sorted(man_a["outputs"]) == ["report.csv", "report_diagnostics.json"]
    for man in (man_a, man_b):
        man.pop("wall_clock_seconds")
        man.pop("output_dir")
    assert man_a == man_b


def test_cp_check_outputs(table_dir, tmp_path):
    out = tmp_path / "cp"
    rc = cli.main(["cp-check", "--model", "frac_ou:alpha=1",
                   "--berman-table", str(table_dir / "berman_table.json"),
                   "--u-grid", "2.5", "--l-grid", "0.5,1", "--x", "0",
                   "--R", "500", "--seed", "2", "--out", str(out)])
    assert rc == 0
    lines = (out / "cp_check.csv").read_text().strip().split("\n")
    assert lines[0] == "u,l,horizon,empirical,se,target,discrepancy"
    assert len(lines) == 3
    summary = json.loads((out / "cp_check_summary.json").read_text())
    assert summary["replications"] == 500
    assert len(summary["sup_discrepancy"]) == 1
    assert read_manifest(out)["command"] == "cp-check"


def test_ratio_check_outputs(table_dir, tmp_path):
    out = tmp_path / "ratio"
    rc = cli.main(["ratio-check", "--model", "frac_ou:alpha=1",
                   "--berman-table", str(table_dir / "berman_table.json"),
                   "--u-grid", "2,2.5", "--x", "0", "--R", "500",
                   "--seed", "2", "--out", str(out)])
    assert rc == 0
    text = (out / "ratio_check.csv").read_text()
    lines = text.strip().split("\n")
    assert lines[0] == "u,A,empirical,se,predicted,ratio"
    assert len(lines) == 3
    assert "np.float64" not in text
    summary = json.loads((out / "ratio_check_summary.json").read_text())
    assert summary["A_rule"] == "sqrt(m/v)"


def test_errors_exit_nonzero_with_message(table_dir, tmp_path, capsys):
    bad_cfg = tmp_path / "bad.json"
    bad_cfg.write_text(json.dumps({"schema_version": 1, "model": "frac_ou"}))
    rc = cli.main(["compare", "--config", str(bad_cfg),
                   "--out", str(tmp_path / "o1")])
    assert rc == 1
    assert capsys.readouterr().err.startswith("error:")

    rc = cli.main(["predict", "--model", "weird:alpha=1",
                   "--horizon", "log_pareto",
                   "--berman-table", str(table_dir / "berman_table.json"),
                   "--u-grid", "2", "--x-grid", "0",
                   "--out", str(tmp_path / "o2")])
    assert rc == 1
    assert "unknown covariance kind" in capsys.readouterr().err

    rc = cli.main(["estimate-constant", "--alpha", "1", "--x-grid", ",",
                   "--out", str(tmp_path / "o3")])
    assert rc == 1
    assert "empty grid" in capsys.readouterr().err


def test_missing_required_flag_is_usage_error():
    with pytest.raises(SystemExit):
        cli.main(["predict"])


def test_threads_flag(table_dir, tmp_path):
    out = tmp_path / "pred_t"
    rc = cli.main(["--threads", "1", "predict", "--model", "frac_ou:alpha=1",
                   "--horizon", "log_pareto",
                   "--berman-table", str(table_dir / "berman_table.json"),
                   "--u-grid", "2", "--x-grid", "0", "--out", str(out)])
    assert rc == 0


def test_parse_model_spec_forms(tmp_path):
    m = cli.parse_model_spec("frac_ou:alpha=0.5")
    assert m.kind == cov.FRAC_OU and m.alpha == 0.5
    m = cli.parse_model_spec({"kind": "fbm_increment", "alpha": 1.0, "a": 2.0})
    assert m.kind == cov.FBM_INCREMENT and m.a == 2.0
    m = cli.parse_model_spec(cov.frac_ou(1.0))
    assert m.kind == cov.FRAC_OU

    csv_path = tmp_path / "r.csv"
    t = np.linspace(0.0, 3.0, 301)
    np.savetxt(csv_path, np.column_stack([t, np.exp(-t)]), delimiter=",")
    m = cli.parse_model_spec(f"tabulated:path={csv_path},alpha=1.0")
    assert m.kind == cov.TABULATED

    with pytest.raises(SchemaError):
        cli.parse_model_spec("frac_ou:alpha=1,beta=2")
    with pytest.raises(SchemaError):
        cli.parse_model_spec("frac_ou:alpha")
    with pytest.raises(SchemaError):
        cli.parse_model_spec("tabulated:alpha=1")
    with pytest.raises(SchemaError):
        cli.parse_model_spec({"alpha": 1.0})
    with pytest.raises(SchemaError):
        cli.parse_model_spec(42)


def test_parse_grid():
    assert cli._parse_grid("1,2.5,3") == [1.0, 2.5, 3.0]
    with pytest.raises(SchemaError):
        cli._parse_grid("")
