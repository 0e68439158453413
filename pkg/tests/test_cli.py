import csv
import json

import pytest

from artifact.cli import DEFAULTS, ConfigError, load_config, main, write_csv

FAST_GRIDS = """
[grids]
jacobi_s_max = 60
jacobi_ds = 0.01
scaling_sigma_half = 1
scaling_dsigma = 0.05
scaling_t_half = 12
scaling_dt = 0.05
projected_sigma_half = 1
projected_dsigma = 0.02
projected_t_half = 10
projected_dt = 0.1
reduction_sigma_max = 4
"""


def _config(tmp_path, experiment: str = "", extra: str = "") -> str:
    path = tmp_path / "run.ini"
    path.write_text(f"[experiment]\n{experiment}\n{FAST_GRIDS}\n{extra}\n", encoding="utf-8")
    return str(path)


def _table(path):
    lines = path.read_text(encoding="utf-8").splitlines()
    return lines[0], list(csv.DictReader(lines[1:]))


def test_defaults_round_trip():
    cfg = load_config()
    assert cfg.eps_list == [0.2, 0.1, 0.05]
    assert set(cfg.values) == set(DEFAULTS)
    assert cfg.hash == load_config().hash
    assert load_config(eps_override="0.3,0.1,0.02").hash != cfg.hash


@pytest.mark.parametrize("text, match", [
    ("[experiment]\nscenario = example1\nbogus = 1\n", "unknown key"),
    ("[nowhere]\nx = 1\n", "unknown section"),
    ("[grids]\njacobi_ds = fast\n", "number"),
    ("[experiment]\nscenario = example2\nomega = 0.9\n", "omega"),
    ("not an ini file\n", "parse"),
])
def test_load_config_rejects_bad_files(tmp_path, text, match):
    path = tmp_path / "bad.ini"
    path.write_text(text, encoding="utf-8")
    with pytest.raises(ConfigError, match=match):
        load_config(str(path))


def test_eps_override_validation():
    with pytest.raises(ConfigError):
        load_config(eps_override="0.1,abc")
    with pytest.raises(ConfigError):
        load_config(eps_override="0.1,1.5")


def test_write_csv_header(tmp_path):
    path = write_csv(tmp_path / "t.csv", ["a", "b"], [(1, 0.1), (2, 1e-300)], "cafe")
    first, rows = _table(path)
    assert first == "# config_hash: cafe"
    assert rows[1]["b"] == "1e-300"


def test_hypotheses_on_example1(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["hypotheses", "--config", _config(tmp_path), "--out", str(out)]) == 0
    assert "all hypotheses pass" in capsys.readouterr().out
    first, rows = _table(out / "hypotheses.csv")
    assert first == f"# config_hash: {load_config(_config(tmp_path)).hash}"
    assert all(r["passed"] == "1" for r in rows)
    assert json.loads((out / "summary.json").read_text())["passed"] is True


def test_hypotheses_fail_on_example2(tmp_path):
    cfg = _config(tmp_path, "scenario = example2\nomega = 0.5")
    assert main(["hypotheses", "--config", cfg, "--out", str(tmp_path / "o")]) == 1


def test_usage_errors_exit_2(tmp_path, capsys):
    assert main(["hypotheses", "--config", _config(tmp_path, "scenario = example2\nomega = 0.9")]) == 2
    assert main(["scaling", "--eps", "0.1,0.05", "--out", str(tmp_path / "o")]) == 2
    assert main(["nonsense"]) == 2
    assert main(["hypotheses", "--threads", "0"]) == 2
    assert main(["hypotheses", "--config", str(tmp_path / "missing.ini")]) == 2
    assert "error" in capsys.readouterr().err


def test_scaling_on_constant_line_is_all_zero(tmp_path):
    out = tmp_path / "out"
    cfg = _config(tmp_path, "scenario = line-constant")
    assert main(["scaling", "--config", cfg, "--out", str(out)]) == 0
    _, rows = _table(out / "scaling.csv")
    assert rows and all(abs(float(r["value"])) < 1e-13 for r in rows)
    _, fits = _table(out / "scaling_slopes.csv")
    assert all(r["exact_zero"] == "1" for r in fits)


def test_reduce_refuses_uncertified_line(tmp_path):
    cfg = _config(tmp_path, "scenario = line-constant")
    out = tmp_path / "out"
    assert main(["reduce", "--config", cfg, "--out", str(out)]) == 1
    summary = json.loads((out / "summary.json").read_text())
    assert "not certified" in summary["results"]["reduce"]["message"]


def test_kernel_and_projected_on_example1(tmp_path):
    out = tmp_path / "out"
    assert main(["kernel", "--config", _config(tmp_path), "--out", str(out)]) == 0
    assert main(["projected", "--config", _config(tmp_path), "--out", str(out)]) == 0
    _, rows = _table(out / "projected.csv")
    assert [float(r["eps"]) for r in rows] == [0.2, 0.1, 0.05]
    assert all(r["converged"] == "1" for r in rows)
    assert (out / "kernel.png").exists() and (out / "phi_eps_0p2.gf").exists()


def test_readme_style_inline_comments(tmp_path):
    path = tmp_path / "commented.ini"
    path.write_text("[experiment]\nscenario = example2   ; the hyperbola\nomega = 0.5 # default\n", encoding="utf-8")
    cfg = load_config(str(path))
    assert cfg["experiment"]["scenario"] == "example2" and cfg["experiment"]["omega"] == 0.5
