import csv
import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from conftest import model_panel
from stavar.cli import cmd_check, cmd_effects, load_config, main
from stavar.errors import InvalidConfig, MissingArtifact
from stavar.panel import CovariateMatrix, NeighborGraph, write_covariates, write_edges, write_panel

FIT_FILES = ("als.json", "precision.json", "pattern.json", "draws.csv", "counterfactual.csv",
             "meta.json")


def _dataset(root, n, adopt, covs=0, seed=0):
    rng = np.random.default_rng(seed)
    A = 0.3 * np.eye(n)
    panel, _, _ = model_panel(rng, n=n, T=40, K=2, A=A, adopt=adopt)
    write_panel(panel, root / "y.csv", root / "d.csv")
    doc = {"data": {"outcomes": "y.csv", "treatment": "d.csv"},
           "basis": {"kind": "natural", "df": 2},
           "mcmc": {"iters": 120, "burnin": 60, "thin": 1, "seed": 11},
           "output": "out"}
    if n > 1:
        ids = panel.unit_ids
        write_edges(NeighborGraph(frozenset({(ids[0], ids[1])})), root / "e.csv")
        doc["data"]["edges"] = "e.csv"
    if covs:
        X = rng.normal(size=(n, covs))
        write_covariates(CovariateMatrix(X, tuple(f"x{j}" for j in range(covs))),
                         panel.unit_ids, root / "x.csv")
        doc["data"]["covariates"] = "x.csv"
    (root / "config.json").write_text(json.dumps(doc))
    return root / "config.json"


def _rows(path):
    with path.open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def two_unit(tmp_path_factory):
    root = tmp_path_factory.mktemp("two")
    cfg_path = _dataset(root, 2, [22, 36])
    assert main(["fit", "--config", str(cfg_path)]) == 0
    return root, cfg_path


@pytest.fixture(scope="module")
def eight_unit(tmp_path_factory):
    root = tmp_path_factory.mktemp("eight")
    cfg_path = _dataset(root, 8, [31, 32, 33, 34, 35, 36, 37, 38], covs=2, seed=4)
    assert main(["fit", "--config", str(cfg_path)]) == 0
    assert main(["effects", "--config", str(cfg_path), "--max-lag", "9",
                 "--cluster-k", "5", "--smooth-df", "3"]) == 0
    return root, cfg_path


def test_fit_writes_declared_files(two_unit):
    root, _ = two_unit
    for name in FIT_FILES:
        assert (root / "out" / name).is_file(), name
    meta = json.loads((root / "out" / "meta.json").read_text())
    fit = meta["fit"]
    assert fit["seed"] == 11 and fit["config"]["iters"] == 120
    assert set(fit["artifacts"]) == set(FIT_FILES) - {"meta.json"}
    assert {"numpy", "scipy", "networkx", "stavar"} <= set(fit["versions"])
    assert set(fit["inputs"]) == {"outcomes", "treatment", "edges"}
    assert fit["timings_seconds"]
    assert meta["schema"]["mcmc"]["seed"] == "int"


def test_rerun_is_byte_identical(two_unit, tmp_path):
    root, cfg_path = two_unit
    assert main(["fit", "--config", str(cfg_path), "--out", str(tmp_path / "again")]) == 0
    first = (root / "out" / "draws.csv").read_bytes()
    assert (tmp_path / "again" / "draws.csv").read_bytes() == first
    assert (tmp_path / "again" / "counterfactual.csv").read_bytes() == \
        (root / "out" / "counterfactual.csv").read_bytes()


def test_inputs_are_not_mutated(two_unit):
    root, _ = two_unit
    meta = json.loads((root / "out" / "meta.json").read_text())
    for name, rec in meta["fit"]["inputs"].items():
        digest = hashlib.sha256(Path(rec["path"]).read_bytes()).hexdigest()
        assert digest == rec["sha256"], name


def test_missing_covariates_file_fails_before_compute(tmp_path, capsys):
    cfg_path = _dataset(tmp_path, 2, [31, 36])
    doc = json.loads(cfg_path.read_text())
    doc["data"]["covariates"] = "nope.csv"
    cfg_path.write_text(json.dumps(doc))
    assert main(["fit", "--config", str(cfg_path)]) == 2
    assert not (tmp_path / "out").exists()
    assert "covariates" in capsys.readouterr().err


def test_config_errors():
    with pytest.raises(InvalidConfig):
        load_config("/no/such/config.json")
    with pytest.raises(InvalidConfig):
        load_config(overrides={"iters": 10, "burnin": 10})
    with pytest.raises(InvalidConfig):
        load_config(overrides={"threads": 0})


def test_flags_override_config(two_unit):
    _, cfg_path = two_unit
    cfg = load_config(cfg_path, {"iters": 500, "seed": None})
    assert cfg.iters == 500 and cfg.seed == 11
    assert cfg.outcomes == cfg_path.parent / "y.csv"


def test_effects_table_shapes(eight_unit):
    root, _ = eight_unit
    att = _rows(root / "out" / "att.csv")
    assert [int(r["lag"]) for r in att] == list(range(10))
    assert "smoothed_point" in att[0]
    fig = _rows(root / "out" / "fig_att_per_lag.csv")
    for est in ("delta", "cumulative_delta", "smoothed_delta"):
        assert sum(r["estimand"] == est for r in fig) == 10
    assert len(_rows(root / "out" / "clusters.csv")) == 5
    hetero = _rows(root / "out" / "hetero.csv")
    assert [r["covariate"] for r in hetero] == ["x0", "x1"]
    assert "effects" in json.loads((root / "out" / "meta.json").read_text())


def test_zero_effects_straddle_zero(eight_unit):
    root, _ = eight_unit
    for r in _rows(root / "out" / "att.csv")[:3]:
        assert float(r["lower"]) <= 0.0 <= float(r["upper"])


def test_effects_without_fit(tmp_path):
    cfg_path = _dataset(tmp_path, 2, [31, 36])
    with pytest.raises(MissingArtifact):
        cmd_effects(load_config(cfg_path))
    assert main(["check", "--config", str(cfg_path)]) == 3


def test_check_healthy(two_unit, tmp_path):
    root, cfg_path = two_unit
    assert main(["check", "--config", str(cfg_path), "--out", str(tmp_path),
                 "--draws-dir", str(root / "out")]) == 0
    report = json.loads((tmp_path / "check.json").read_text())
    assert report["pass"]
    assert set(report["audits"]) == {"als_converged", "kkt_residual", "a_mask", "omega_mask"}
    assert report["trace"] and {"ess", "split_rhat"} <= set(report["trace"][0])


def test_check_flags_off_mask_draw(two_unit, tmp_path, capsys):
    root, cfg_path = two_unit
    bad = tmp_path / "bad"
    bad.mkdir()
    for name in FIT_FILES[:-1]:
        (bad / name).write_bytes((root / "out" / name).read_bytes())
    pattern = json.loads((bad / "pattern.json").read_text())
    ids = pattern["unit_ids"]
    # adoptions 14 periods apart exceed the gap, so one cross lag is cut
    off = [[a, b] for a in ids for b in ids if [a, b] not in pattern["a_support"]]
    assert off
    a, b = off[0]
    with (bad / "draws.csv").open("a") as fh:
        fh.write(f"3,A,{a},{b},0.25\n")
    cfg = load_config(cfg_path, {"out": str(tmp_path / "report")})
    report = cmd_check(cfg, bad)
    audit = report["audits"]["a_mask"]
    assert not audit["pass"]
    assert audit["coordinates"] == [{"draw": 3, "unit_i": a, "unit_j": b}]
    assert main(["check", "--config", str(cfg_path), "--draws-dir", str(bad),
                 "--out", str(tmp_path / "r2")]) == 3


def test_check_flags_kkt(two_unit, tmp_path):
    root, cfg_path = two_unit
    cfg = load_config(cfg_path, {"out": str(tmp_path), "kkt_tol": 1e-300})
    report = cmd_check(cfg, root / "out")
    audit = report["audits"]["kkt_residual"]
    if audit["value"] > 1e-300:
        assert not audit["pass"] and "solver_iters" in audit
        assert main(["check", "--config", str(cfg_path), "--draws-dir", str(root / "out"),
                     "--out", str(tmp_path / "r"), "--kkt-tol", "1e-300"]) == 4
    # doctored residual is caught at the default tolerance as well
    doc = json.loads((root / "out" / "precision.json").read_text())
    doc["kkt_residual"] = 1e-3
    bad = tmp_path / "bad"
    bad.mkdir()
    for name in FIT_FILES[:-1]:
        (bad / name).write_bytes((root / "out" / name).read_bytes())
    (bad / "precision.json").write_text(json.dumps(doc))
    report = cmd_check(load_config(cfg_path, {"out": str(tmp_path / "r3")}), bad)
    assert not report["audits"]["kkt_residual"]["pass"]
    assert report["audits"]["kkt_residual"]["value"] == 1e-3


def test_simulate_confounder_tiny(tmp_path):
    assert main(["simulate", "--design", "confounder", "--reps", "2", "--seed", "1",
                 "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "report.json").read_text())
    assert len(doc["cells"]) == 12
    assert json.loads((tmp_path / "meta.json").read_text())["simulate"]["reps"] == 2


def test_simulate_rejects_zero_reps(tmp_path):
    assert main(["simulate", "--design", "confounder", "--reps", "0",
                 "--out", str(tmp_path)]) == 2
