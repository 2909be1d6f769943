import json

import numpy as np

from wharm.cli import main
from wharm.grid import Grid, GridFunction, load_csv, save_csv


def _write_inputs(tmp_path, N=64):
    g = Grid(1, 1.0, N)
    rng = np.random.default_rng(0)
    f = GridFunction(g, rng.standard_normal(g.shape))
    fpath = str(tmp_path / "f.csv")
    save_csv(f, fpath)
    wpath = str(tmp_path / "w.json")
    with open(wpath, "w") as fh:
        json.dump({"kind": "power", "alpha": 0.25}, fh)
    return fpath, wpath


def test_cli_apply(tmp_path, capsys):
    fpath, _ = _write_inputs(tmp_path)
    out = str(tmp_path / "out.csv")
    rc = main(["apply", "--kernel", "heat-free", "--input", fpath, "--t", "0.01", "--out", out])
    assert rc == 0
    assert load_csv(out).values.shape == (64,)


def test_cli_bmo(tmp_path, capsys):
    fpath, wpath = _write_inputs(tmp_path)
    rc = main(["bmo", "--flavor", "classical-w", "--input", fpath, "--weight", wpath])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert out["norm"] > 0


def test_cli_squarefn(tmp_path, capsys):
    fpath, wpath = _write_inputs(tmp_path)
    rc = main(["squarefn", "--flavor", "heat-neumann", "--input", fpath, "--weight", wpath])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert out["hardy_norm"] > 0


def test_cli_opnorm(tmp_path, capsys):
    fpath, wpath = _write_inputs(tmp_path)
    rc = main([
        "opnorm", "--op", "commutator", "--family", "neumann", "--j", "1",
        "--b", fpath, "--mu", wpath, "--lambda", wpath, "--p", "2", "--method", "svd",
    ])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert out["norm"] > 0
    assert out["certificate"]["method"] == "svd"


def test_cli_harness(tmp_path, capsys):
    cfg = {"points_per_axis": 64, "instances": 4, "max_generation": 4, "seed": 0}
    cpath = str(tmp_path / "cfg.json")
    with open(cpath, "w") as fh:
        json.dump(cfg, fh)
    out = str(tmp_path / "report.json")
    csvp = str(tmp_path / "report.csv")
    rc = main(["harness", "run", "john-nirenberg", "--config", cpath, "--out", out, "--csv", csvp])
    assert rc == 0
    rep = json.loads(open(out).read())
    assert rep["experiment"] == "john-nirenberg"
    assert open(csvp).readline().strip() != ""


def test_cli_apply_neumann_quadrature(tmp_path, capsys):
    fpath, _ = _write_inputs(tmp_path, N=32)
    out = str(tmp_path / "out.csv")
    rc = main([
        "apply", "--kernel", "riesz-neumann-1", "--backend", "quadrature",
        "--input", fpath, "--out", out,
    ])
    assert rc == 0
    assert np.all(np.isfinite(load_csv(out).values))


def test_cli_harness_riesz_ap(tmp_path):
    cfg = {"points_per_axis": 64, "max_generation": 5}
    cpath = str(tmp_path / "cfg.json")
    with open(cpath, "w") as fh:
        json.dump(cfg, fh)
    out = str(tmp_path / "r.json")
    rc = main(["harness", "run", "riesz-ap", "--config", cpath, "--out", out])
    assert rc == 0
    rep = json.loads(open(out).read())
    assert rep["pass"] is True
    assert rep["rows"][0]["ap_per_lattice"]


def test_shipped_configs_parse_and_run_small(tmp_path):
    # every shipped config is valid JSON for its experiment (sizes trimmed)
    import pathlib

    for name, path in [
        ("two-weight-commutator", "configs/two_weight.json"),
        ("john-nirenberg", "configs/john_nirenberg.json"),
        ("dirichlet-counterexample", "configs/dirichlet.json"),
        ("bmo-coincidence", "configs/bmo_coincidence.json"),
        ("riesz-ap", "configs/riesz_ap.json"),
    ]:
        cfg = json.loads(pathlib.Path(path).read_text())
        cfg["points_per_axis"] = 32
        cfg["max_generation"] = 4
        cfg["symbols"] = 2
        cfg["instances"] = 2
        cfg["refinements"] = [32, 128]
        from wharm import harness as H

        rep = H.run(name, cfg)
        assert "pass" in rep
