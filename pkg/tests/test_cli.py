from __future__ import annotations

import csv
import json
import math

import numpy as np
import pytest

from ringbounds import cli, modcap
from ringbounds.core import Params


def run_json(capsys, argv):
    code = cli.run(argv)
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip() else None), err


def test_modulus_closed_form(capsys):
    code, rep, _ = run_json(capsys, ["modulus", "--n", "3", "--p", "2", "--r1", "0.5", "--r2", "1"])
    assert code == 0
    assert rep["results"]["value"] == pytest.approx(4 * math.pi, rel=1e-14)
    assert 0 <= rep["results"]["relative_gap"] <= 0.02
    assert rep["verdict"] == "pass"
    assert set(rep) >= {"command", "config", "seed", "version", "constants", "tables", "verdict", "diagnostics"}
    assert rep["constants"]["omega"] == pytest.approx(4 * math.pi)


def test_degenerate_ring_is_usage_error(capsys):
    code, rep, err = run_json(capsys, ["modulus", "--n", "3", "--r1", "1", "--r2", "1"])
    assert code == 1 and rep is None
    assert "degenerate ring r1 == r2" in err
    assert err.startswith("ringbounds: ")


@pytest.mark.parametrize("argv", [[], ["nope"], ["modulus", "--n", "3"], ["modulus", "--n", "x", "--r1", "1", "--r2", "2"],
                                  ["modulus", "--n", "3", "--p", "1", "--r1", "0.5", "--r2", "1"]])
def test_usage_errors_exit_1(capsys, argv):
    assert cli.run(argv) == 1
    assert "ringbounds:" in capsys.readouterr().err


def test_regime_error_names_requirement(capsys):
    code, _, err = run_json(capsys, ["theorem1", "--n", "3", "--p", "3", "--map", "identity", "--weight", "constant"])
    assert code == 1
    assert "p<n" in err.replace(" ", "")


def test_sharpness_stretch(capsys):
    code, rep, _ = run_json(capsys, ["sharpness", "--n", "3", "--case", "stretch", "--a", "2"])
    assert code == 0
    assert rep["results"]["max_ratio_error"] <= 1e-12
    assert abs(rep["results"]["gamma0_minus_a"]) <= 1e-12
    assert len(rep["tables"]) == 5


def test_verify_definition_scaled_weight_fails_with_exit_2(capsys):
    argv = ["verify-definition", "--n", "3", "--p", "2", "--map", "stretch(a=2)", "--r1", "0.3", "--r2", "0.9"]
    code, rep, _ = run_json(capsys, argv)
    assert code == 0 and rep["verdict"] == "pass"
    code, rep, _ = run_json(capsys, argv + ["--scale", "0.5"])
    assert code == 2 and rep["verdict"] == "fail"


def test_not_converged_exit_3(capsys, monkeypatch):
    def stuck(n, p, a, b, grid_size=1024):
        dens = modcap.GridDensity(np.linspace(a, b, 3), [1.0, 1.0])
        return modcap.ModulusResult(1.0, False, grid_size, 1.0, dens)

    monkeypatch.setattr(cli.modcap, "discrete_ring_modulus", stuck)
    code, rep, err = run_json(capsys, ["modulus", "--n", "3", "--r1", "0.5", "--r2", "1"])
    assert code == 3
    assert rep["verdict"] == "not-converged"
    assert "not converged" in err


def test_json_has_no_nan_or_inf_literals(capsys):
    code = cli.run(["qmean", "--n", "3", "--weight", "radial-power:exponent=-1", "--budget", "2000"])
    out = capsys.readouterr().out
    assert code == 0
    for bad in ("NaN", "Infinity"):
        assert bad not in out
    rep = json.loads(out)
    assert rep["results"]["Q0"] == "inf"
    assert rep["tables"][0]["bound"] == "nan"


def test_seed_precedence(capsys, monkeypatch):
    base = ["fmo", "--n", "2", "--weight", "radial-log", "--budget", "2000"]
    monkeypatch.delenv(cli.SEED_ENV, raising=False)
    assert run_json(capsys, base)[1]["seed"] == 42
    monkeypatch.setenv(cli.SEED_ENV, "7")
    assert run_json(capsys, base)[1]["seed"] == 7
    rep = run_json(capsys, base + ["--seed", "9"])[1]
    assert rep["seed"] == 9 and rep["config"]["seed"] == 9
    monkeypatch.setenv(cli.SEED_ENV, "seven")
    assert cli.run(base) == 1


def test_reruns_are_bit_exact(capsys):
    argv = ["fmo", "--n", "3", "--weight", "radial-log", "--budget", "4000", "--seed", "3"]
    a = run_json(capsys, argv)[1]
    b = run_json(capsys, argv)[1]
    assert a == b
    c = run_json(capsys, argv[:-1] + ["4"])[1]
    assert c["tables"] != a["tables"]


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[common]\nn = 3\np = 2\n\n[modulus]\nr1 = 0.25\nr2 = 1\ngrid = 128\n")
    code, rep, _ = run_json(capsys, ["modulus", "--config", str(cfg)])
    assert code == 0
    assert rep["config"]["r1"] == 0.25 and rep["config"]["grid"] == 128
    assert rep["results"]["value"] == pytest.approx(modcap.ring_modulus_exact(3, 2, 0.25, 1.0))
    code, rep, _ = run_json(capsys, ["modulus", "--config", str(cfg), "--r1", "0.5"])
    assert rep["config"]["r1"] == 0.5
    assert rep["results"]["value"] == pytest.approx(4 * math.pi)


def test_config_unknown_key_reports_line(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[common]\nn = 3\n\n[modulus]\nr1 = 0.5\nradius = 1\n")
    assert cli.run(["modulus", "--config", str(cfg)]) == 1
    err = capsys.readouterr().err
    assert f"config {cfg}:6: [modulus] unknown key 'radius'" in err


def test_config_unknown_section(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[extras]\nn = 3\n")
    assert cli.run(["modulus", "--config", str(cfg), "--r1", "0.5", "--r2", "1"]) == 1
    assert "unknown section [extras]" in capsys.readouterr().err


def test_out_and_csv_files(tmp_path, capsys):
    out, table = tmp_path / "rep.json", tmp_path / "rep.csv"
    code = cli.run(["sharpness", "--n", "3", "--out", str(out), "--csv", str(table)])
    assert code == 0
    assert capsys.readouterr().out == ""
    rep = json.loads(out.read_text())
    with open(table, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [float(r["r"]) for r in rows] == [row["r"] for row in rep["tables"]]
    assert {"r", "bound", "measured", "slack", "ratio"} <= set(rows[0])


def test_integral_i_reports_upper_bound(capsys):
    code, rep, _ = run_json(capsys, ["integral-i", "--n", "3", "--p", "2", "--weight", "constant",
                                     "--r1", "0.5", "--r2", "1"])
    assert code == 0
    assert rep["results"]["I"] == pytest.approx(1.0, rel=1e-10)
    assert rep["results"]["capacity_upper_bound"] == pytest.approx(4 * math.pi, rel=1e-10)


@pytest.mark.parametrize("text, a", [("identity", 1.0), ("stretch(a=2)", 2.0), ("stretch:a=0.5", 0.5),
                                     ("stretch( a = 3 )", 3.0)])
def test_parse_map(text, a):
    assert cli.parse_map(text, 3).a == a


@pytest.mark.parametrize("text", ["rotate", "stretch(b=2)", "stretch()", "stretch(a=x)"])
def test_parse_map_rejects(text):
    with pytest.raises(cli.UsageError):
        cli.parse_map(text, 3)


@pytest.mark.parametrize(
    "text, r, value",
    [
        ("constant", 0.3, 1.0),
        ("constant:value=2.5", 0.3, 2.5),
        ("radial-power:exponent=-1", 0.25, 4.0),
        ("radial-power:exponent=2,scale=3", 0.5, 0.75),
        ("radial-log", math.exp(-2), 2.0),
        ("stretch-oracle:a=2", 0.4, 0.2),
        ("expression:expr=1/r + 1", 0.5, 3.0),
        ("expression:expr=exp(-r**2)", 1.0, math.exp(-1)),
    ],
)
def test_parse_weight_radial_profiles(text, r, value):
    Q = cli.parse_weight(text, Params(3, 2))
    assert Q.profile(np.array([r]))[0] == pytest.approx(value, rel=1e-12)
    pt = np.array([[r, 0.0, 0.0]])
    assert Q(pt)[0] == pytest.approx(value, rel=1e-12)


def test_expression_weight_with_coordinates_is_pointwise():
    Q = cli.parse_weight("expression:expr=1 + x1**2", Params(3, 2))
    assert Q.radial_profile is None and not Q.is_radial_about(np.zeros(3))
    assert np.allclose(Q(np.array([[0.5, 0.1, 0.0], [0.0, 0.2, 0.0]])), [1.25, 1.0])


@pytest.mark.parametrize("text", ["gaussian", "radial-power", "radial-power:scale=2", "constant:val=1",
                                  "expression:expr=1/s", "expression:expr=(("])
def test_parse_weight_rejects(text):
    with pytest.raises(cli.UsageError):
        cli.parse_weight(text, Params(3, 2))


def test_float_list():
    assert cli.float_list("1e-1, 1e-2,1e-3") == [0.1, 0.01, 0.001]
    with pytest.raises(Exception):
        cli.float_list("a,b")


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as info:
        cli.run(["--version"])
    assert info.value.code == 0
    assert capsys.readouterr().out.strip().startswith("ringbounds ")
