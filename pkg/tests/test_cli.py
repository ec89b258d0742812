import csv
import io
import json
import subprocess
import sys

import pytest

from vldht.cli import (EXIT_CONFIG, EXIT_OK, EXIT_RESOURCE, ExperimentConfig, SweepSpec,
                       config_from_dict, emit_sweep_csv, main, run, sweep_points)
from vldht.errors import ConfigError
from vldht.info import dsbs
from vldht.solver import binary_example_exponent, solve_vl_exponent


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


def run_main(argv, capsys):
    code = main(argv)
    return code, capsys.readouterr().out


# -- config ----------------------------------------------------------------

def test_config_round_trip():
    cfg = config_from_dict({"mode": "exponent", "alpha": 0.1, "rate": 0.8, "epsilon": 0.1})
    again = config_from_dict(json.loads(cfg.to_json()))
    assert again == cfg


def test_int_coerced_to_float():
    assert config_from_dict({"mode": "exponent", "rate": 1}).rate == 1.0


@pytest.mark.parametrize("d", [
    {"mode": "exponent", "bogus": 1},
    {"mode": "teleport"},
    {"mode": "exponent", "rate": "fast"},
    {"mode": "exponent", "steps": 2.5},
])
def test_bad_configs(d):
    with pytest.raises(ConfigError):
        config_from_dict(d)


def test_unknown_field_in_file_exits_2(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"alpha": 0.1, "rate": 0.8, "colour": "red"}))
    code, out = run_main(["exponent", "--config", str(p)], capsys)
    assert code == EXIT_CONFIG and out == ""


def test_flags_override_file(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"alpha": 0.1, "rate": 0.8, "seed": 4}))
    code, out = run_main(["exponent", "--config", str(p), "--seed", "9", "--dump-config"], capsys)
    assert code == EXIT_OK
    d = json.loads(out)
    assert d["seed"] == 9 and d["alpha"] == 0.1


def test_sweep_spec_validation():
    with pytest.raises(ConfigError):
        SweepSpec("alpha", 0.1, 0.5, 5)
    with pytest.raises(ConfigError):
        SweepSpec("alpha", 0.1, 0.4, 1)
    with pytest.raises(ConfigError):
        SweepSpec("beta", 0.1, 0.4, 3)


# -- modes -----------------------------------------------------------------

def test_exponent_row_matches_solver(capsys):
    code, out = run_main(["exponent", "--alpha", "0.1", "--rate", "0.8", "--epsilon", "0.1"], capsys)
    assert code == EXIT_OK
    (row,) = rows_of(out)
    res = solve_vl_exponent(dsbs(0.1), 0.8, 0.1)
    assert float(row["theta"]) == res.theta
    assert float(row["iux"]) == res.iux and float(row["iuy"]) == res.iuy


def test_gaussian_exponent(capsys):
    code, out = run_main(["exponent", "--rho", "1", "--rate", "0.9", "--epsilon", "0.1"], capsys)
    assert code == EXIT_OK
    assert float(rows_of(out)[0]["theta"]) == pytest.approx(1.0, abs=1e-12)


def test_alpha_sweep(capsys):
    code, out = run_main(["sweep", "--sweep-param", "alpha", "--start", "0.05", "--stop", "0.45",
                          "--steps", "9", "--rate", "0.8", "--epsilon", "0.1"], capsys)
    assert code == EXIT_OK
    rows = rows_of(out)
    assert len(rows) == 9
    assert all(float(r["theta_vl"]) >= float(r["theta_fl"]) for r in rows)
    r01 = rows[1]
    assert float(r01["value"]) == pytest.approx(0.1)
    assert float(r01["theta_vl"]) == binary_example_exponent(float(r01["value"]), 0.8, 0.1)


def test_rho_sweep_starts_at_zero(capsys):
    code, out = run_main(["sweep", "--sweep-param", "rho", "--start", "0", "--stop", "1",
                          "--steps", "5", "--rate", "0.8", "--epsilon", "0.1"], capsys)
    assert code == EXIT_OK
    assert float(rows_of(out)[0]["theta_vl"]) == 0.0


def test_optimizer_sweep_over_rate():
    cfg = ExperimentConfig(mode="sweep", joint=[[0.3, 0.1], [0.1, 0.5]], epsilon=0.2,
                           sweep_param="R", start=0.1, stop=0.5, steps=3)
    rows = sweep_points(cfg, SweepSpec("R", 0.1, 0.5, 3))
    assert [r[4] for r in rows] == ["optimizer"] * 3
    assert all(r[2] >= r[3] - 1e-9 for r in rows)


def test_emit_sweep_csv_to_path(tmp_path):
    spec = SweepSpec("alpha", 0.1, 0.2, 2)
    cfg = ExperimentConfig(mode="sweep", rate=0.5, epsilon=0.1)
    path = tmp_path / "s.csv"
    emit_sweep_csv(spec, sweep_points(cfg, spec), path)
    assert path.read_text().splitlines()[0] == "param,value,theta_vl,theta_fl,theta_source"


def test_same_seed_same_bytes(tmp_path, capsys):
    argv = ["simulate-link", "--alpha", "0.1", "--n", "8", "--mu", "0.5", "--epsilon", "0.8",
            "--aux-crossover", "0.2", "--trials", "300", "--seed", "5"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(argv + ["--out", str(a)]) == EXIT_OK
    assert main(argv + ["--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    assert capsys.readouterr().out == ""


def test_simulate_dmc_row():
    buf = io.StringIO()
    cfg = ExperimentConfig(mode="simulate-dmc", alpha=0.1, aux_crossover=0.2, bsc=0.05, n=16,
                           kappa=0.5, epsilon=0.2, epsilon_prime=0.15, trials=200)
    assert run(cfg, buf) == EXIT_OK
    (row,) = rows_of(buf.getvalue())
    assert int(row["q"]) == 8 and int(row["n_prime"]) == 10


def test_exponent_dmc_row():
    buf = io.StringIO()
    cfg = ExperimentConfig(mode="exponent-dmc", alpha=0.1, bec=0.5, kappa=1.0, epsilon=0.1)
    assert run(cfg, buf) == EXIT_OK
    (row,) = rows_of(buf.getvalue())
    assert float(row["capacity"]) == pytest.approx(0.5, abs=1e-9)


def test_resource_limit_exits_3():
    cfg = ExperimentConfig(mode="simulate-link", alpha=0.1, n=30, mu=0.3, epsilon=0.9,
                           rate=0.9, trials=10)
    assert run(cfg, io.StringIO()) == EXIT_RESOURCE


def test_missing_field_exits_2():
    assert run(ExperimentConfig(mode="exponent", alpha=0.1), io.StringIO()) == EXIT_CONFIG


def test_verify_mode_passes():
    buf = io.StringIO()
    cfg = ExperimentConfig(mode="verify", lemma_trials=500)
    assert run(cfg, buf) == EXIT_OK
    rows = rows_of(buf.getvalue())
    assert rows and all(r["passed"] == "True" for r in rows)


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "vldht", "exponent", "--alpha", "0.2",
                          "--rate", "0.5"], capture_output=True, text=True)
    assert out.returncode == 0
    assert out.stdout.startswith("rate,epsilon,theta")
