import json
import math

import numpy as np
import pytest

from rp4bp import acceptance, cli
from rp4bp.acceptance import CheckResult


def _meta(path):
    meta = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            k, _, v = line[1:].strip().partition(":")
            meta[k.strip()] = v.strip()
    return meta


def _run(tmp_path, *argv):
    return cli.main([*argv, "--output-dir", str(tmp_path)])


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.build_parser().parse_args(["--version"])
    assert exc.value.code == 0
    assert "rp4bp" in capsys.readouterr().out


def test_usage_errors_exit_2(tmp_path):
    assert cli.main([]) == 2
    assert cli.main(["nope"]) == 2
    assert _run(tmp_path, "melnikov", "--mu", "0.7") == 2
    assert _run(tmp_path, "transform", "--chain", "Fourier", "--state", "1") == 2


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"params": {"mu": 0.5, "nu": 1}}))
    assert _run(tmp_path, "melnikov", "--config", str(cfg)) == 2
    cfg.write_text(json.dumps({"colour": "red"}))
    assert _run(tmp_path, "melnikov", "--config", str(cfg)) == 2
    cfg.write_text("{not json")
    assert _run(tmp_path, "melnikov", "--config", str(cfg)) == 2


@pytest.mark.parametrize("bad", [{"seed": -1}, {"infinity": {"x_init": 2.0}},
                                 {"chains": {"window": [11, 9]}},
                                 {"integrator": {"rel_tol": 0}}])
def test_config_validation(bad):
    with pytest.raises(cli.ConfigError):
        cli.RunConfig.from_dict(bad)


def test_config_digest_is_stable():
    a = cli.RunConfig.from_dict({"params": {"mu": 0.3}})
    b = cli.RunConfig.from_dict({"params": {"mu": 0.3}})
    assert a.digest() == b.digest()
    assert a.digest() != cli.RunConfig.from_dict({"params": {"mu": 0.4}}).digest()


def test_numerical_failure_exit_3(tmp_path):
    # no binary: the potential has no critical points
    assert _run(tmp_path, "melnikov", "--mu", "0", "--delta", "0") == 3


def test_verify_failure_exit_4(tmp_path, monkeypatch):
    failing = lambda: CheckResult(1, "stub", False, "forced failure", 0.0, {})
    monkeypatch.setattr(acceptance, "CHECKS", (failing,))
    assert _run(tmp_path, "verify") == 4
    rec = json.loads((tmp_path / "verify.json").read_text())
    assert rec["passed"] is False
    assert _run(tmp_path, "verify", "--only", "5") == 2


def test_env_var_and_flag_precedence(tmp_path, monkeypatch):
    env_dir, flag_dir = tmp_path / "env", tmp_path / "flag"
    monkeypatch.setenv(cli.OUTPUT_ENV, str(env_dir))
    args = ["scattering", "--mu", "0.5", "--delta", "0", "--Psi-range", "9", "11", "--n", "3"]
    assert cli.main(args) == 0
    assert (env_dir / "scattering.csv").exists()
    assert cli.main([*args, "--output-dir", str(flag_dir)]) == 0
    assert (flag_dir / "scattering.csv").exists()


def test_transform_round_trip(tmp_path):
    code = _run(tmp_path, "transform", "--chain", "AsteroidPolar,McGehee",
                "--state", "1.5,0.5,0.1,0.3,0.2", "--verify", "--mu", "0.3", "--q", "7")
    assert code == 0
    rec = json.loads((tmp_path / "transform.json").read_text())
    assert [s["chart"] for s in rec["steps"]] == ["AsteroidPolar", "AsteroidMcGehee"]
    assert max(s["round_trip"] for s in rec["steps"]) < 1e-12
    assert "config_hash" in rec["metadata"] and rec["metadata"]["version"] == cli.VERSION
    assert _run(tmp_path, "transform", "--chain", "McGehee", "--state", "1,2") == 2


def test_integrate_writes_csv(tmp_path):
    code = _run(tmp_path, "integrate", "--system", "asteroid", "--state",
                "1.5,0,0,1,0", "--t1", "3", "--mu", "0")
    assert code == 0
    path = tmp_path / "trajectory_asteroid.csv"
    meta = _meta(path)
    assert meta["system"] == "asteroid" and meta["version"] == cli.VERSION


def test_reruns_are_bit_identical(tmp_path):
    args = ["melnikov", "--mu", "0.3", "--delta", "0", "--Psi0", "8", "--n", "36"]
    assert _run(tmp_path / "a", *args) == 0
    assert _run(tmp_path / "b", *args) == 0
    a = (tmp_path / "a" / "melnikov_sigma.csv").read_bytes()
    assert a == (tmp_path / "b" / "melnikov_sigma.csv").read_bytes()


@pytest.mark.parametrize("mu", [0.3, 0.5])
def test_melnikov_critical_phases(tmp_path, mu):
    psi0, s0, q = 0.7, 0.0123, 1000
    assert _run(tmp_path, "melnikov", "--mu", str(mu), "--delta", "0", "--psi0", str(psi0),
                "--s0", str(s0), "--Psi0", "10") == 0
    meta = _meta(tmp_path / "melnikov_sigma.csv")
    base = q * s0 - psi0
    wrap = lambda a: (a + math.pi) % (2 * math.pi) - math.pi
    assert abs(wrap(float(meta["sigma_minus"]) - base)) < 1e-6
    assert abs(wrap(float(meta["sigma_plus"]) - base - math.pi)) < 1e-6
    data = np.loadtxt(tmp_path / "melnikov_sigma.csv", delimiter=",",
                      skiprows=len(meta) + 1)
    assert data.shape == (360, 5)


def test_melnikov_Psi_sweep(tmp_path):
    assert _run(tmp_path, "melnikov", "--sweep", "Psi", "--mu", "0.5", "--delta", "0",
                "--Psi-range", "10", "20", "--n", "3") == 0
    meta = _meta(tmp_path / "melnikov_Psi.csv")
    data = np.loadtxt(tmp_path / "melnikov_Psi.csv", delimiter=",", skiprows=len(meta) + 1)
    assert np.allclose(data[:, 3], data[:, 4], rtol=1e-3)


def test_periodic_circular_limit(tmp_path, capsys):
    args = ["periodic", "--mu", "0.5", "--delta", "0", "--branch", "plus", "--q", "326"]
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"periodic": {"epsilon0": 0.16, "n_samples": 32}}))
    assert _run(tmp_path, *args, "--config", str(cfg)) == 0
    path = capsys.readouterr().out.strip()
    rec = json.loads(open(path).read())
    r = np.array(rec["samples"]["state"])[:, 0]
    assert np.abs(r - 1.0).max() < 1e-12
    assert rec["rotation_ratio"] == {"num": 325, "den": 326}
    assert rec["metadata"]["version"] == cli.VERSION
    # cached on rerun, recomputed identically with --force
    before = open(path).read()
    assert _run(tmp_path, *args, "--config", str(cfg)) == 0
    assert capsys.readouterr().out.strip() == path
    assert _run(tmp_path, *args, "--config", str(cfg), "--force") == 0
    assert open(path).read() == before


def test_periodic_defaults_give_unit_radius(tmp_path, capsys):
    assert _run(tmp_path, "periodic", "--mu", "0.5", "--delta", "0", "--branch", "plus") == 0
    rec = json.loads(open(capsys.readouterr().out.strip()).read())
    assert np.abs(np.array(rec["samples"]["state"])[:, 0] - 1.0).max() < 1e-12
    assert rec["rotation_ratio"] == {"num": 999, "den": 1000}
