import csv
import io
import json

import numpy as np
import pytest

from addkit.cli import run


def invoke(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def test_density_and_csv(tmp_path):
    path = tmp_path / "p.csv"
    code, out, _ = invoke("density", "--family", "builtin:gaussian", "--t", "1", "--out", str(path))
    assert code == 0
    assert json.loads(out)["passed"]
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x", "value"]
    data = np.array(rows[1:], dtype=float)
    ref = np.exp(-data[:, 0] ** 2 / 4) / np.sqrt(4 * np.pi)
    assert np.max(np.abs(data[:, 1] - ref)) < 1e-8


def test_density_csv_lossless(tmp_path):
    from addkit import density as dens
    from addkit import gaussian

    path = tmp_path / "p.csv"
    invoke("density", "--family", "builtin:gaussian", "--t", "1", "--grid", "N=1024,L=auto", "--out", str(path))
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    table = dens.density_grid(gaussian(), 0.0, 1.0, dens.GridSpec(1, 1024))
    assert np.max(np.abs(data[:, 1] - table.values)) == 0.0


@pytest.mark.parametrize(
    "argv",
    [
        ("density", "--family", "builtin:gaussian", "--t", "-1"),
        ("density", "--family", "builtin:nope", "--t", "1"),
        ("density", "--t", "1"),
        ("density", "--family", "builtin:gaussian", "--t", "1", "--grid", "N=abc"),
        ("bogus",),
        (),
    ],
)
def test_usage_errors(argv):
    code, _, _ = invoke(*argv)
    assert code == 2


def test_missing_family_file(tmp_path):
    code, _, err = invoke("density", "--family", str(tmp_path / "none.json"), "--t", "1")
    assert code == 2 and "cannot read" in err


def test_family_file(tmp_path):
    cfg = tmp_path / "f.json"
    cfg.write_text(json.dumps({"kind": "poisson", "dimension": 1, "profile": {"form": "t"}}))
    code, out, _ = invoke("check-adjoint", "--family", str(cfg), "--t", "1", "--tol", "1e-5")
    assert code == 0


def test_verify_cndf_cubic():
    code, out, _ = invoke("verify-cndf", "--symbol", "abs(x)^3")
    assert code == 1
    doc = json.loads(out)
    assert not doc["passed"]
    witness = doc["results"]["report"]["witness"]
    assert np.allclose(np.ravel(witness["points"]), [0, 1, 2])


def test_verify_cndf_family():
    code, out, _ = invoke("verify-cndf", "--family", "builtin:poisson", "--t", "0.5,1")
    assert code == 0


def test_text_format():
    code, out, _ = invoke("verify-dual", "--family", "builtin:gaussian", "--format", "text")
    assert code == 0
    assert out.splitlines()[0] == "verify-dual: PASS"
    assert all(line.strip().startswith("[PASS]") for line in out.splitlines()[1:])


def test_geometry_curve(tmp_path):
    curve = tmp_path / "vol.csv"
    code, out, _ = invoke("geometry", "--family", "builtin:poisson", "--triples", "2000", "--curve", str(curve))
    assert code == 0
    with open(curve) as fh:
        rows = list(csv.DictReader(fh))
    for name in ("dQ", "deltaQ"):
        vols = [float(r["volume"]) for r in rows if r["metric"] == name]
        assert len(vols) == 61 and np.all(np.diff(vols) >= 0)


@pytest.mark.parametrize("cmd", ["operator-check", "ck-check"])
def test_operator_commands(cmd):
    code, _, _ = invoke(cmd, "--family", "builtin:gaussian")
    assert code == 0


def test_simulate_then_cf_check(tmp_path):
    path = tmp_path / "paths.csv"
    code, _, _ = invoke("simulate", "--family", "builtin:gaussian", "--times", "0,1", "--paths", "20000",
                        "--seed", "5", "--out", str(path))
    assert code == 0
    code, out, _ = invoke("cf-check", "--in", str(path), "--probes", "0,1")
    assert code == 0


def test_simulate_atom_is_assumption_failure():
    code, _, err = invoke("simulate", "--family", "builtin:poisson", "--process", "X", "--times", "0,0.5,1",
                          "--paths", "10", "--seed", "0")
    assert code == 1 and "assumption" in err


def test_oracle_table(tmp_path):
    path = tmp_path / "o.csv"
    code, _, _ = invoke("oracle", "--name", "coshlog", "--t", "2", "--out", str(path))
    assert code == 0


def test_suite_gaussian_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert invoke("suite", "--family", "builtin:gaussian", "--triples", "5000", "--report", str(a))[0] == 0
    assert invoke("suite", "--family", "builtin:gaussian", "--triples", "5000", "--report", str(b))[0] == 0
    da, db = json.loads(a.read_text()), json.loads(b.read_text())
    da.pop("wall_time"), db.pop("wall_time")
    assert da == db
    assert da["config_hash"] == db["config_hash"]
