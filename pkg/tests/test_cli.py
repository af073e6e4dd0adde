import csv
import io
import json
import subprocess
import sys
from decimal import Decimal

import pytest

from perclab.cli import EXIT_FLAGGED, EXIT_OK, EXIT_USAGE, main

from conftest import ROOT

SMALL = {
    "seed": 3,
    "n": 2000,
    "region": {"mesh": 0.125},
    "events": [
        {"kind": "TwoPointBB", "marks": {"u1": 0.0, "u2": 1.0}},
        {"kind": "ThreePoint", "marks": {"u1": 0.0, "u2": 1.0, "w": [0.5, 0.8660254037844386]}},
    ],
}


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def write_cfg(tmp_path, d, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(d))
    return str(p)


def test_theory_kf_matches_golden(capsys, golden):
    code, out, _ = run(capsys, "theory", "--kf")
    assert code == EXIT_OK
    val = json.loads(out)["K_F"]
    assert f"{val:.12g}" == f"{float(Decimal(golden['K_F'])):.12g}"


def test_theory_psi_positive(capsys):
    code, out, _ = run(capsys, "theory", "--psi", "--u1", "0", "--s", "1", "--u2", "3", "--w", "1.0,1.0")
    assert code == EXIT_OK
    assert json.loads(out)["psi"] > 0


def test_theory_hyp2f1_at_zero(capsys):
    code, out, _ = run(capsys, "theory", "--hyp2f1", "-0.5", "-0.3333333333333333", "1.1666666666666667", "0")
    assert code == EXIT_OK
    assert list(json.loads(out).values()) == [1]


@pytest.mark.parametrize("argv", [
    ["theory"],
    ["theory", "--psi", "--u1", "0"],
    ["theory", "--psi", "--u1", "0", "--s", "1", "--u2", "3", "--w", "1.0,-1.0"],
    ["theory", "--w", "nonsense", "--psi"],
    ["theory", "--bogus"],
])
def test_theory_bad_arguments(capsys, argv):
    with pytest.raises(SystemExit) as e:
        code = main(argv)
        raise SystemExit(code)
    assert e.value.code == EXIT_USAGE
    assert capsys.readouterr().err


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "perclab", "theory", "--k2"], capture_output=True, text=True, cwd=ROOT)
    assert r.returncode == 0 and "K2" in r.stdout


def test_simulate_is_byte_identical(tmp_path, capsys):
    cfg = write_cfg(tmp_path, SMALL)
    for d in ("a", "b"):
        assert run(capsys, "simulate", cfg, "--out", str(tmp_path / d))[0] == EXIT_OK
    assert (tmp_path / "a/estimates.csv").read_bytes() == (tmp_path / "b/estimates.csv").read_bytes()
    assert (tmp_path / "a/manifest.json").read_bytes() == (tmp_path / "b/manifest.json").read_bytes()
    assert run(capsys, "simulate", cfg, "--out", str(tmp_path / "c"), "--workers", "2")[0] == EXIT_OK
    assert (tmp_path / "a/estimates.csv").read_bytes() == (tmp_path / "c/estimates.csv").read_bytes()


def test_simulate_strict_config_lists_every_problem(tmp_path, capsys):
    bad = dict(SMALL, colour="red", region={"mesh": "fine", "zoom": 2})
    del bad["seed"]
    code, _, err = run(capsys, "simulate", write_cfg(tmp_path, bad), "--out", str(tmp_path / "x"))
    assert code == EXIT_USAGE
    for needle in ("colour", "seed", "zoom", "region.mesh"):
        assert needle in err
    assert not (tmp_path / "x").exists()


def test_simulate_needs_out(tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["simulate", write_cfg(tmp_path, SMALL)])
    assert e.value.code == EXIT_USAGE


def test_strict_exit_codes(tmp_path, capsys):
    cfg = dict(SMALL, ratios=[{"name": "far", "events": {"ThreePoint": 1, "TwoPointBB": -1}, "target": 5.0}])
    path = write_cfg(tmp_path, cfg)
    code, _, err = run(capsys, "simulate", path, "--out", str(tmp_path / "a"))
    assert code == EXIT_OK and "FLAGGED" in err
    code, _, _ = run(capsys, "simulate", path, "--out", str(tmp_path / "b"), "--strict")
    assert code == EXIT_FLAGGED
    rows = list(csv.DictReader(open(tmp_path / "b/ratios.csv")))
    assert rows[0]["flagged"] == "True"


def test_simulate_doubling_output(tmp_path, capsys):
    cfg = dict(SMALL, doubling=True, n=500)
    assert run(capsys, "simulate", write_cfg(tmp_path, cfg), "--out", str(tmp_path / "a"))[0] == EXIT_OK
    rows = list(csv.DictReader(open(tmp_path / "a/doubling.csv")))
    assert [r["event"] for r in rows] == ["TwoPointBB", "ThreePoint"]


def test_compare(tmp_path, capsys):
    cfg = write_cfg(tmp_path, SMALL)
    run(capsys, "simulate", cfg, "--out", str(tmp_path / "a"))
    run(capsys, "simulate", cfg, "--out", str(tmp_path / "b"), "--seed", "4")
    code, out, _ = run(capsys, "compare", str(tmp_path / "a"), str(tmp_path / "b"), "--out", str(tmp_path))
    assert code == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 2 and (tmp_path / "comparison.csv").exists()


def test_compare_refuses_mixed_embeddings(tmp_path, capsys):
    cfg = write_cfg(tmp_path, SMALL)
    run(capsys, "simulate", cfg, "--out", str(tmp_path / "a"))
    run(capsys, "simulate", cfg, "--out", str(tmp_path / "b"))
    man = json.loads((tmp_path / "b/manifest.json").read_text())
    man["embedding"] = "square lattice"
    (tmp_path / "b/manifest.json").write_text(json.dumps(man))
    code, _, err = run(capsys, "compare", str(tmp_path / "a"), str(tmp_path / "b"))
    assert code == EXIT_USAGE and "embedding" in err


def test_enumerate_demo_within_five_sigma(capsys):
    code, out, _ = run(capsys, "enumerate", "--demo", "--strict")
    assert code == EXIT_OK
    assert "12 sites" in out
    rows = list(csv.DictReader(io.StringIO(out.split("\n", 1)[1])))
    assert rows and all(r["within_5sigma"] == "True" for r in rows)


def test_enumerate_bundled_config(capsys):
    code, out, _ = run(capsys, "enumerate", str(ROOT / "configs/enumerate_demo.json"), "--n", "5000", "--strict")
    assert code == EXIT_OK


def test_circuits_all_open(capsys):
    code, out, _ = run(capsys, "circuits", str(ROOT / "configs/circuits_open.json"), "--strict")
    assert code == EXIT_OK
    rows = {r["circuit"]: r for r in csv.DictReader(io.StringIO(out))}
    assert float(rows["outer"]["exists_freq"]) == 1.0
    assert float(rows["inner"]["exists_freq"]) == 1.0


def test_circuits_random(tmp_path, capsys):
    cfg = {"seed": 2, "n": 50, "region": {"mesh": 0.25}, "annulus": {"z": [0.0, 2.0], "a": 0.5, "b": 1.5}}
    code, out, _ = run(capsys, "circuits", write_cfg(tmp_path, cfg), "--strict")
    assert code == EXIT_OK
    rows = {r["circuit"]: r for r in csv.DictReader(io.StringIO(out))}
    assert rows["outer"]["exists_freq"] == rows["inner"]["exists_freq"]
