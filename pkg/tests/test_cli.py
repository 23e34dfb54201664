import csv
import json
import math

import pytest

from exciton_transport.cli import main
from exciton_transport.config import FIELDS, REQUIRED, load_config, parse_config
from exciton_transport.errors import ConfigError


def _write(path, text):
    path.write_text(text)
    return str(path)


MINIMAL = """
[geometry]
kind = "rings"
n = 1
N = 3
spacing = 1.0

[dynamics]
t_max = 1.0
n_time_samples = 5
"""


def test_parse_fills_defaults():
    cfg = parse_config({"geometry": {"kind": "rings", "n": 2, "N": 3, "spacing": 1.0}})
    assert cfg["geometry.R"] == 1.0
    assert cfg["dynamics.integrator.dt_override"] is None
    assert cfg.is_set("geometry.n") and not cfg.is_set("geometry.R")
    nested = cfg.as_nested()
    assert nested["dynamics"]["gamma"] == 0.0
    assert "kind" not in nested["experiment"]


@pytest.mark.parametrize(
    "data,path",
    [
        ({"geometry": {"n": 0}}, "geometry.n"),
        ({"geometry": {"n": True}}, "geometry.n"),
        ({"geometry": {"kind": "cube"}}, "geometry.kind"),
        ({"geometry": {"colour": 1}}, "geometry.colour"),
        ({"physics": {"x": 1}}, "physics"),
        ({"dynamics": {"gamma": -1.0}}, "dynamics.gamma"),
        ({"dynamics": {"integrator": {"dt_override": 0.0}}}, "dynamics.integrator.dt_override"),
        ({"experiment": {"n_values": [1, "two"]}}, "experiment.n_values[1]"),
        ({"experiment": {"spacings": []}}, "experiment.spacings"),
        ({"gamma": 1.0}, "gamma"),
    ],
)
def test_config_errors_are_path_qualified(data, path):
    with pytest.raises(ConfigError) as exc:
        parse_config(data)
    assert exc.value.path == path
    assert str(exc.value).startswith(path + ":")


def test_missing_required_key():
    cfg = parse_config({"geometry": {"kind": "rings", "n": 2}})
    with pytest.raises(ConfigError, match="geometry.N"):
        cfg.require("geometry.kind", "geometry.N")


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.toml")
    with pytest.raises(ConfigError, match="malformed"):
        load_config(_write(tmp_path / "bad.toml", "[geometry\n"))


def test_help_lists_every_key_with_default(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    for f in FIELDS:
        assert f.path in out
    assert "(required)" in out and "101" in out


def test_simulate_minimal(tmp_path):
    cfg = _write(tmp_path / "min.toml", MINIMAL)
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    rows = list(csv.reader(open(tmp_path / "o" / "sigma.csv")))
    assert rows[0] == ["time", "sigma"]
    assert rows[1] == ["0", "0"]
    pops = list(csv.reader(open(tmp_path / "o" / "populations.csv")))
    assert pops[0] == ["time", "ring", "population"]
    assert len(pops) == 1 + 5 * 3
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["config"]["geometry"]["R"] == 1.0


def test_simulate_missing_key_exits_1(tmp_path, capsys):
    cfg = _write(tmp_path / "bad.toml", '[geometry]\nkind = "rings"\nn = 2\nspacing = 1.0\n')
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 1
    assert "geometry.N" in capsys.readouterr().err


def test_simulate_numerical_failure_exits_2(tmp_path):
    text = MINIMAL.replace("n = 1", "n = 2").replace("spacing = 1.0", "spacing = 0.001")
    text += "gamma = 1.0\n[dynamics.integrator]\ndt_override = 10.0\n"
    cfg = _write(tmp_path / "stiff.toml", text.replace("[dynamics]\n", "[dynamics]\n", 1))
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_simulate_far_field_dephasing_agrees_with_closed_form(tmp_path, capsys):
    text = """
[geometry]
kind = "rings"
n = 3
N = 31
spacing = 10.0
[dynamics]
gamma = 0.1
t_max = 1.0
n_time_samples = 3
"""
    assert main(["simulate", "--config", _write(tmp_path / "g.toml", text), "--out", str(tmp_path / "o")]) == 0
    sim = float(list(csv.reader(open(tmp_path / "o" / "sigma.csv")))[-1][1])
    capsys.readouterr()
    assert main(["analytic", "--n", "3", "--N", "31", "--D", "10", "--t", "1"]) == 0
    analytic = float(capsys.readouterr().out.splitlines()[0].split("=")[1])
    assert abs(sim / analytic - 1) <= 0.03


def test_simulate_with_disorder_and_debug_hamiltonian(tmp_path):
    text = MINIMAL.replace("n = 1", "n = 2") + "[disorder]\nsigma = 0.2\nseed = 9\n[output]\ndebug_hamiltonian = true\n"
    cfg = _write(tmp_path / "d.toml", text)
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "sigma.csv").read_bytes() == (tmp_path / "b" / "sigma.csv").read_bytes()
    assert (tmp_path / "a" / "hamiltonian.csv").read_text().startswith("row,col,value")


def test_sweep_scaling_far_field(tmp_path, capsys):
    text = """
[experiment]
kind = "scaling"
n_values = [1, 2, 3, 4, 5, 6, 7]
spacings = [10.0]
states = ["delocalized"]
"""
    cfg = _write(tmp_path / "s.toml", text)
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "o"), "--jobs", "1"]) == 0
    out = capsys.readouterr().out
    alpha = float(next(line for line in out.splitlines() if line.startswith("alpha[state=delocalized")).split("=")[-1])
    assert abs(alpha - 1) <= 0.05
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["config"]["experiment"]["profile"] == "fast"


def test_sweep_is_reproducible(tmp_path):
    text = """
[geometry]
N = 7
[disorder]
realizations = 3
[experiment]
kind = "disorder"
n_values = [1, 2]
spacings = [2.0]
sigmas = [0.1, 1.0]
times = [0.5, 1.0]
"""
    cfg = _write(tmp_path / "d.toml", text)
    for name in ("a", "b"):
        assert main(["sweep", "--config", cfg, "--out", str(tmp_path / name), "--seed", "42", "--jobs", "1"]) == 0
    assert (tmp_path / "a" / "results.csv").read_bytes() == (tmp_path / "b" / "results.csv").read_bytes()
    assert json.loads((tmp_path / "a" / "manifest.json").read_text())["base_seed"] == 42


def test_sweep_bad_kind_exits_1(tmp_path):
    cfg = _write(tmp_path / "s.toml", '[experiment]\nkind = "fractal"\n')
    assert main(["sweep", "--config", cfg]) == 1
    assert main(["sweep"]) == 1


def test_analytic_nearest_neighbour(capsys):
    assert main(["analytic", "--n", "5", "--N", "31", "--R", "1", "--D", "10", "--t", "1", "--nearest-neighbor"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert float(lines[0].split("=")[1]) == pytest.approx(math.sqrt(2) * 5 / 100, rel=1e-11)


def test_analytic_single_site_rings_agree(capsys):
    assert main(["analytic", "--n", "1", "--N", "31"]) == 0
    deloc, loc = (float(line.split("=")[1]) for line in capsys.readouterr().out.splitlines())
    assert deloc == loc


def test_analytic_interference_vector(tmp_path, capsys):
    path = _write(tmp_path / "h.csv", "0,0\n1,-1\n1,-1\n")
    assert main(["analytic", "--coefficients", path, "--D", "1", "--t", "0.01"]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "sigma_deloc = 0"


def test_analytic_spectrum_and_reference(tmp_path, capsys):
    out = tmp_path / "spec.csv"
    assert main(["analytic", "--n", "3", "--N", "5", "--quantity", "spectrum", "--out", str(out)]) == 0
    rows = list(csv.reader(open(out)))
    assert rows[0] == ["p", "q", "eigenvalue"] and len(rows) == 16
    assert main(["analytic", "--quantity", "haken-strobl", "--gamma", "1", "--t", "1"]) == 0
    value = float(capsys.readouterr().out.split("=")[1])
    assert value == pytest.approx(math.sqrt(4 * math.exp(-1)))


def test_analytic_invalid_parameters_exit_1():
    assert main(["analytic", "--n", "3", "--N", "4"]) == 1
    assert main(["analytic", "--N", "5"]) == 1
    assert main(["analytic", "--quantity", "haken-strobl"]) == 1


def test_validate_subset(capsys):
    assert main(["validate", "3", "4", "-v"]) == 0
    out = capsys.readouterr().out
    assert "[PASS] 3." in out and "[PASS] 4." in out and "2/2 criteria passed" in out


def test_validate_failure_exit_code(capsys):
    assert main(["validate", "8"]) == 2
    assert "[FAIL] 8." in capsys.readouterr().out


def test_every_field_has_a_default_or_is_required():
    for f in FIELDS:
        assert f.default is REQUIRED or f.default is None or f.kind.rstrip("?[]") in ("int", "float", "bool", "str")
