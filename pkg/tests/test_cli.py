import json

import numpy as np
import pytest

from wgscat import cli
from wgscat.glue import ScatteringResult
from wgscat.solver import DEFAULT_ETA


def write(tmp_path, data):
    path = tmp_path / f"cfg{len(list(tmp_path.glob('cfg*.json')))}.json"
    path.write_text(json.dumps(data))
    return str(path)


def parse(argv):
    return cli.load_config(cli.build_parser().parse_args(argv))


def test_parser_requires_command():
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args([])


def test_config_merge_and_flags(tmp_path, monkeypatch):
    monkeypatch.delenv("WGSCAT_THREADS", raising=False)
    cfg_path = write(tmp_path, {"bc": "neumann", "k": 1.5, "eta": [-0.1, 0.05], "panels": {"h": 0.5, "levels": 4},
                                "grid": {"nx": 3}})
    cfg = parse(["smatrix", "--config", cfg_path, "--seed", "9", "--out", str(tmp_path / "o")])
    assert cfg.bc == "neumann" and cfg.k == 1.5 and cfg.eta == complex(-0.1, 0.05)
    assert cfg.h == 0.5 and cfg.levels == 4 and cfg.seed == 9 and cfg.options == {"grid": {"nx": 3}}
    cfg = parse(["smatrix", "--config", cfg_path, "--eta=-0.15,0", "--bc", "dirichlet"])
    assert cfg.eta == -0.15 and cfg.bc == "dirichlet"
    assert parse(["smatrix"]).eta == DEFAULT_ETA
    monkeypatch.setenv("WGSCAT_THREADS", "1")
    assert parse(["smatrix"]).threads == 1
    assert parse(["smatrix", "--threads", "1"]).threads == 1


@pytest.mark.parametrize("argv", [["smatrix", "--tol", "0.5"], ["smatrix", "--eta", "abc"],
                                  ["smatrix", "--threads", "0"]])
def test_invalid_options_exit_with_config_status(argv, tmp_path):
    assert cli.main(argv + ["--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_bad_config_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["smatrix", "--config", str(bad), "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    cfg = write(tmp_path, {"geometry": {"sphere": {}}})
    assert cli.main(["smatrix", "--config", cfg, "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    cfg = write(tmp_path, {"geometry": {"chain": {"lengths": [3.0], "colour": 1}}})
    assert cli.main(["smatrix", "--config", cfg, "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    cfg = write(tmp_path, {"geometry": {"lattice": {"rows": 1}}})
    assert cli.main(["smatrix", "--config", cfg, "--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_smatrix_and_field_commands(tmp_path, capsys):
    cfg = write(tmp_path, {"geometry": {"chain": {"lengths": [3.0, 4.0]}}, "grid": {"nx": 8, "ny": 3},
                           "c_minus": [[1.0, 0.0], 0.0]})
    out = tmp_path / "run"
    assert cli.main(["smatrix", "--config", cfg, "--out", str(out)]) == cli.EXIT_OK
    res = ScatteringResult.from_json(out / "smatrix.json")
    assert abs(abs(res.S[1, 0]) - 1) < 1e-9
    log = json.loads((out / "smatrix_log.json").read_text())
    assert log["stats"]["components"] == 2 and len(log["components"]) == 2
    assert "PASS" in capsys.readouterr().out
    # the saved circuit can be fed back in as a geometry file
    cfg2 = write(tmp_path, {"geometry": {"file": str(out / "circuit.json")}})
    assert cli.main(["smatrix", "--config", cfg2, "--out", str(tmp_path / "again")]) == cli.EXIT_OK
    assert cli.main(["field", "--config", cfg, "--out", str(out)]) == cli.EXIT_OK
    rows = (out / "field.csv").read_text().splitlines()
    assert rows[0] == "x,y,re_u,im_u" and len(rows) == 1 + 8 * 3
    cfg3 = write(tmp_path, {"geometry": {"chain": {"lengths": [3.0]}}, "c_minus": [1.0]})
    assert cli.main(["field", "--config", cfg3, "--out", str(out)]) == cli.EXIT_CONFIG


def test_smatrix_reports_failed_threshold(tmp_path, capsys):
    cfg = write(tmp_path, {"geometry": {"chain": {"lengths": [3.0]}}, "flux_threshold": 0.0})
    assert cli.main(["smatrix", "--config", cfg, "--out", str(tmp_path)]) == cli.EXIT_FAILED
    assert "FAIL" in capsys.readouterr().out


def test_verify_analytic_command(tmp_path):
    cfg = write(tmp_path, {"bcs": ["dirichlet"], "grid": 10})
    assert cli.main(["verify-analytic", "--config", cfg, "--out", str(tmp_path)]) == cli.EXIT_OK
    rep = json.loads((tmp_path / "analytic_report.json").read_text())
    assert rep["runs"][0]["passed"] and rep["runs"][0]["max_error"] < 1e-8
    assert (tmp_path / "analytic_dirichlet.csv").exists()
    cfg = write(tmp_path, {"bcs": ["dirichlet"], "x0": [6.0, 0.0]})
    assert cli.main(["verify-analytic", "--config", cfg, "--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_sweep_command_flags_short_range(tmp_path):
    # two close lengths cannot span three decades: the command must report failure
    cfg = write(tmp_path, {"L": [3.0, 3.5], "M_extra": [0]})
    assert cli.main(["sweep-merge-error", "--config", cfg, "--out", str(tmp_path)]) == cli.EXIT_FAILED
    summary = json.loads((tmp_path / "merge_error_summary.json").read_text())
    assert summary[0]["M"] == 1 and summary[0]["decades"] < 3
    assert len((tmp_path / "merge_error.csv").read_text().splitlines()) == 3


def test_bench_command_small(tmp_path):
    cfg = write(tmp_path, {"nx": [2], "rows": 2, "geometry": {"lattice": {"spacing": 13.0}}})
    code = cli.main(["bench", "--config", cfg, "--out", str(tmp_path)])
    summary = json.loads((tmp_path / "bench_summary.json").read_text())
    assert code == (cli.EXIT_OK if summary["sparse_share_max"] < 0.05 else cli.EXIT_FAILED)
    assert summary["records"][0]["components"] >= 2
    assert np.isfinite(summary["records"][0]["flux_residual"])
