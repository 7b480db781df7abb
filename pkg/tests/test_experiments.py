import json
import math

import numpy as np
import pytest
from scipy.stats import poisson

from dpplab import cli
from dpplab.experiments import (EXPERIMENTS, ExperimentConfig, run_experiment, run_maxnn,
                                run_nnballs, tv_to_poisson, two_sample_tv)
from dpplab.numerics import RngStream

SMALL = {
    "sample": {"R": 2.0, "replicates": 5},
    "voidprob": {"r_list": [0.5], "kostlan_replicates": 500, "hkpv_replicates": 40},
    "vn": {"n_list": [100.0, 1000.0]},
    "bounds": {"W": 3.0, "S": 1.5, "T": 2.5, "replicates": 8, "witness_replicates": 8,
               "distance_cells": 2, "palm_h": 0.25},
    "nnballs": {"n": [6.0], "replicates": 6},
    "maxnn": {"n_list": [5.0, 8.0], "replicates": 5},
    "na-test": {"R": 3.0, "replicates": 30},
    "palm-test": {"window": 1.5, "replicates": 20, "palm_h": 0.25},
    "decay-test": {"configurations": 10},
}


class TestConfig:
    def test_roundtrip(self, tmp_path):
        cfg = ExperimentConfig("nnballs", {"n": [10.0], "tau": 1.0}, 5, str(tmp_path))
        p = tmp_path / "c.json"
        p.write_text(cfg.to_json())
        assert ExperimentConfig.from_file(p).to_dict() == cfg.to_dict()

    @pytest.mark.parametrize("bad", [
        dict(experiment="nope"),
        dict(experiment="sample", params={"replicates": 0}),
        dict(experiment="nnballs", params={"tau": -1.0}),
        dict(experiment="sample", params={"R": 0.0}),
        dict(experiment="sample", seed=-3),
    ])
    def test_validation(self, bad):
        with pytest.raises(ValueError):
            ExperimentConfig(**bad)


class TestStatistics:
    def test_tv_identical(self):
        a = np.array([0, 1, 1, 2, 5])
        assert two_sample_tv(a, a) == 0.0
        assert two_sample_tv(np.zeros(4, int), np.ones(4, int)) == 1.0

    def test_tv_poisson(self):
        assert tv_to_poisson(np.zeros(10, int), 1.0) == pytest.approx(1 - math.exp(-1))
        c = RngStream(1).poisson(1.0, 200000)
        assert tv_to_poisson(c, 1.0) < 0.01
        assert tv_to_poisson(c, 2.0) > 0.2


@pytest.mark.parametrize("name", sorted(EXPERIMENTS))
def test_rerun_byte_identical(name, tmp_path):
    cfg = ExperimentConfig(name, SMALL[name], 17, str(tmp_path / "a"))
    a = run_experiment(cfg)
    b = run_experiment(ExperimentConfig.from_file(tmp_path / "a" / "config.json"))
    assert a.to_json(with_clock=False) == b.to_json(with_clock=False)
    report = json.loads((tmp_path / "a" / "report.json").read_text())
    assert report["config"]["seed"] == 17 and "wall_clock" in report
    assert report["version"] == a.version
    assert not list((tmp_path / "a").glob("*.tmp*"))


def test_worker_count_independent(monkeypatch):
    a = run_nnballs(n=[6.0], replicates=8, seed=3, workers=1)
    monkeypatch.setenv("DPPLAB_WORKERS", "2")
    b = run_nnballs(n=[6.0], replicates=8, seed=3)
    assert a.to_json(with_clock=False) == b.to_json(with_clock=False)


def test_nnballs_single_replicate_deterministic():
    a = run_nnballs(n=[6.0], replicates=1, seed=9)
    b = run_nnballs(n=[6.0], replicates=1, seed=9)
    assert a.to_json(with_clock=False) == b.to_json(with_clock=False)


def test_nnballs_refuses_large_n():
    with pytest.raises(ValueError, match="use n below"):
        run_nnballs(n=[500.0], replicates=1)
    with pytest.raises(ValueError):
        run_nnballs(n=[3.0], replicates=1)


def test_nnballs_outputs(tmp_path):
    rep = run_experiment(ExperimentConfig("nnballs", {"n": [8.0], "replicates": 40}, 2,
                                          str(tmp_path)))
    m = rep.get("mean_psi[n=8]")
    assert abs(m["value"] - 1.0) <= 3 * m["se"]
    tv = rep.get("tv_poisson[n=8]")
    assert tv["lo"] <= tv["hi"]
    assert (tmp_path / "psi_n8.jsonl").exists()
    head = (tmp_path / "counts_n8.csv").read_text().splitlines()[0]
    assert head == "k,frequency,poisson"


def test_maxnn_median_positive():
    rep = run_maxnn(n_list=[20.0], replicates=10, seed=1)
    assert rep.get("max_nn[n=20]")["median"] > 0
    assert rep.passed


class TestCLI:
    def test_pass_exit_code(self, tmp_path, capsys):
        code = cli.main(["sample", "--n", "2", "--replicates", "20", "--seed", "1",
                         "--out", str(tmp_path)])
        assert code == 0
        assert "PASS" in capsys.readouterr().out
        assert {p.name for p in tmp_path.iterdir()} >= {"config.json", "report.json", "patterns.jsonl"}

    def test_fail_exit_code(self, capsys):
        # the asymptotic-ratio trend of v_n does not approach 1 (it tends to 2)
        assert cli.main(["vn", "--n", "100", "1000", "10000", "1000000"]) == 2
        assert "FAIL" in capsys.readouterr().out

    def test_error_exit_code(self, tmp_path):
        assert cli.main(["nnballs", "--n", "2"]) == 1
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert cli.main(["sample", "--config", str(bad)]) == 1
        other = tmp_path / "other.json"
        other.write_text(json.dumps({"experiment": "vn", "params": {}}))
        assert cli.main(["sample", "--config", str(other)]) == 1

    def test_config_with_overrides(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"experiment": "na-test", "params": {"R": 3.0, "replicates": 10},
                                   "seed": 4}))
        out = tmp_path / "o"
        assert cli.main(["na-test", "--config", str(cfg), "--replicates", "25", "--out", str(out)]) in (0, 2)
        echoed = json.loads((out / "config.json").read_text())
        assert echoed["params"]["replicates"] == 25 and echoed["seed"] == 4

    def test_help_lists_experiments(self, capsys):
        with pytest.raises(SystemExit):
            cli.main(["--help"])
        text = capsys.readouterr().out
        for name in EXPERIMENTS:
            assert name in text
        assert "DPPLAB_WORKERS" in text
