import csv
import json
import subprocess
import sys

import numpy as np
import pytest
import yaml

from dvpadmm import cli
from dvpadmm.errors import ConfigError
from dvpadmm.harness import (
    ExperimentConfig,
    config_from_dict,
    load_config,
    make_schedule,
    read_sweep,
    run_experiment,
    sweep_alpha,
)
from dvpadmm.tuning import PrivacyUtility, UtilityCurve, optimize_alpha

SMALL = {
    "name": "small", "nodes": 4, "T": 6, "seeds": 2, "C1": 40, "log10_rho": -2.5, "alpha": 0.5,
    "data": {"n_per_node": 60, "dim": 4, "n_test": 200},
}


def small(**kw):
    raw = dict(SMALL)
    raw.update(kw)
    return config_from_dict(raw)


@pytest.mark.parametrize("bad", [
    {"mode": "dvp", "alpha": None},
    {"alpha": 0.0},
    {"alpha": -1.0},
    {"C1": 100},
    {"schedule": {"k": [3, 2], "nodes": [3, 4]}},
    {"schedule": {"k": [3, 3], "nodes": [3]}},
    {"topology": {"kind": "torus"}},
    {"mode": "secret"},
    {"bogus_key": 1},
    {"rho": 0.1},
    {"alpha": {0: 0.5, 1: 0.5}},
])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        small(**bad)


def test_c1_checked_against_partitions(tmp_path):
    from dvpadmm.dataset import synthesize, write_processed
    write_processed(tmp_path / "d.csv", synthesize(100, 3, 2.0, 0))
    cfg = small(data={"source": "processed", "path": str(tmp_path / "d.csv")})
    with pytest.raises(ConfigError):
        run_experiment(cfg)


def test_yaml_loading(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text(yaml.safe_dump(SMALL))
    cfg = load_config(p)
    assert cfg.rho == pytest.approx(10 ** -2.5) and cfg.seeds == [0, 1]
    p.write_text("nodes: [1,\n")
    with pytest.raises(ConfigError):
        load_config(p)


def test_schedule_relabels_phases():
    cfg = small(T=9, nodes=5, schedule={"k": [3, 3, 3], "nodes": [5, 5, 5]}, topology={"kind": "path"})
    s = make_schedule(cfg, 0)
    assert s.total_duration == 9 and len(s.phases) == 3
    assert s == make_schedule(cfg, 0)


def test_run_experiment_artifacts_and_determinism(tmp_path):
    a = run_experiment(small(out_dir=str(tmp_path / "a")))
    b = run_experiment(small(out_dir=str(tmp_path / "b")), jobs=2)
    for seed in (0, 1):
        for name in ("metrics.csv", "roc.csv", "scores.csv"):
            fa = (tmp_path / "a" / f"seed_{seed}" / name).read_bytes()
            assert fa == (tmp_path / "b" / f"seed_{seed}" / name).read_bytes()
        summ = json.loads((tmp_path / "a" / f"seed_{seed}" / "summary.json").read_text())
        for key in ("final_er", "auc", "fpr", "fnr", "wall_time_s"):
            assert key in summ
    head = next(csv.reader(open(tmp_path / "a" / "seed_0" / "metrics.csv")))
    assert head == ["iter", "node", "empirical_risk", "consensus_residual", "alpha", "phi", "zeta", "noise_norm"]
    agg = json.loads((tmp_path / "a" / "aggregate.json").read_text())
    assert agg["n_seeds"] == 2 and set(agg["auc"]) == {"mean", "std"}
    assert a.aggregate["final_er"] == b.aggregate["final_er"]


def test_topology_varying_run():
    cfg = small(T=6, nodes=4, schedule={"k": [2, 2, 2], "nodes": [3, 4, 2]}, topology={"kind": "random"})
    res = run_experiment(cfg)
    assert all(s["nodes"] == 2 for s in res.summaries)


def test_sweep(tmp_path):
    cfg = small(out_dir=str(tmp_path), seeds=1)
    rows = sweep_alpha(cfg, [0.3])
    assert len(rows) == 1
    rows = sweep_alpha(cfg, [0.05, 0.3, 1.0])
    pts = read_sweep(tmp_path / "sweep.csv")
    assert [p[0] for p in pts] == [0.05, 0.3, 1.0]
    assert [r["n_seeds"] for r in rows] == [1, 1, 1]


def run_cli(*args, cwd):
    return subprocess.run([sys.executable, "-m", "dvpadmm", *args], cwd=cwd, capture_output=True, text=True)


def test_cli_pipeline(tmp_path):
    (tmp_path / "c.yaml").write_text(yaml.safe_dump(SMALL))
    r = run_cli("synth", "--n", "400", "--dim", "4", "--output", "d.csv", "--seed", "3", cwd=tmp_path)
    assert r.returncode == 0, r.stderr
    r = run_cli("--config", "c.yaml", "train", "--data", "d.csv", "--out-dir", "run", "--seed", "0", cwd=tmp_path)
    assert r.returncode == 0, r.stderr
    for name in ("metrics.csv", "roc.csv", "scores.csv", "summary.json"):
        assert (tmp_path / "run" / "seed_0" / name).exists()
    assert (tmp_path / "run" / "aggregate.json").exists()
    r = run_cli("roc", "--scores", "run/seed_0/scores.csv", "--output", "roc.csv", cwd=tmp_path)
    assert r.returncode == 0, r.stderr
    assert next(csv.reader(open(tmp_path / "roc.csv"))) == ["fpr", "tpr"]
    r = run_cli("private-train", "--config", "c.yaml", "--alpha", "0.2", "--out-dir", "p", cwd=tmp_path)
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "p" / "seed_1" / "summary.json").exists()


def test_cli_preprocess(tmp_path, kdd_file):
    raw = kdd_file(80)
    test_raw = kdd_file(20, seed=1, name="test.txt")
    code = cli.main(["preprocess", "--input", str(raw), "--output", str(tmp_path / "tr.csv"),
                     "--apply", str(test_raw), str(tmp_path / "te.csv"),
                     "--spec-out", str(tmp_path / "spec.json")])
    assert code == 0
    from dvpadmm.dataset import read_processed
    tr, te = read_processed(tmp_path / "tr.csv"), read_processed(tmp_path / "te.csv")
    assert tr.n == 80 and te.n == 20 and tr.d == te.d
    assert np.all(np.linalg.norm(te.X, axis=1) <= 1 + 1e-12)


def test_cli_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as err:
        cli.main(["bogus"])
    assert err.value.code == 2
    with pytest.raises(SystemExit) as err:
        cli.main(["tune"])
    assert err.value.code == 2
    assert cli.main(["tune", "--sweep", str(tmp_path / "missing.csv")]) == 1
    assert "error" in capsys.readouterr().err
    (tmp_path / "bad.yaml").write_text("alpha: -1\n")
    assert cli.main(["train", "--config", str(tmp_path / "bad.yaml")]) == 1


def test_cli_tune_matches_grid(tmp_path, capsys):
    truth = UtilityCurve(0.3, 5.0, 0.2)
    path = tmp_path / "s.csv"
    alphas = [0.05, 0.4, 1.0]
    with open(path, "w") as fh:
        fh.write("alpha,mean_final_er\n")
        for a in alphas:
            fh.write(f"{a!r},{float(truth(a))!r}\n")
    assert cli.main(["tune", "--sweep", str(path), "--out-dir", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "C5=" in out and "alpha*=" in out
    res = json.loads((tmp_path / "tune.json").read_text())
    sec = UtilityCurve(res["c5"], res["c6"], res["c7"])
    pri = PrivacyUtility()
    grid = np.linspace(1e-4, 1, 10_000)
    s = sec(grid)
    z = np.where(s <= res["U1"], s - pri(grid), np.inf)
    assert abs(res["alpha_star"] - grid[np.argmin(z)]) <= 1e-4


def test_config_defaults_mirror_experiments():
    cfg = ExperimentConfig()
    assert cfg.T == 45 and len(cfg.seeds) == 20 and cfg.C1 == 650
