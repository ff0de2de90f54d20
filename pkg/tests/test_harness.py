import json

import numpy as np
import pytest

from logistic_oed import ConfigError
from logistic_oed.cli import main
from logistic_oed.harness import Scenario, run_s3_perturbation, run_scenario
from logistic_oed.rng import child_rng

SMALL = {
    "name": "small",
    "truth": {"kind": "ou", "phi": 0.02, "variance": 9.0},
    "analysis": "iid",
    "replicates": 3,
    "seed": 5,
    "fit": {"restarts": 4},
}


def test_child_streams_are_independent_and_reproducible():
    a = child_rng(1, 0, 0).random(4)
    np.testing.assert_array_equal(a, child_rng(1, 0, 0).random(4))
    assert not np.allclose(a, child_rng(1, 0, 1).random(4))
    assert not np.allclose(a, child_rng(2, 0, 0).random(4))


def test_outputs_are_byte_identical(tmp_path):
    run_scenario(SMALL, tmp_path / "a")
    run_scenario(SMALL, tmp_path / "b")
    for name in ("replicates.csv", "summary.csv", "designs.json", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    text = (tmp_path / "a" / "summary.csv").read_text()
    assert text.startswith("# logistic_oed csv v1\naxis,axis_value,param,mean_width")


def test_parallel_matches_serial():
    serial = run_scenario(SMALL, n_jobs=1)
    parallel = run_scenario(SMALL, n_jobs=2)
    assert serial.replicates_csv() == parallel.replicates_csv()


def test_seed_changes_results():
    other = dict(SMALL, seed=6)
    assert run_scenario(SMALL).replicates_csv() != run_scenario(other).replicates_csv()


def test_sweep_axes_resolve():
    sc = Scenario.from_dict({
        "name": "s", "truth": {"kind": "ou", "phi": 0.1, "sigma2": 0.1},
        "sweep": {"axis": "sigma2", "values": [1.0, 4.0], "coupling": "stationary"},
    })
    _, truth, analysis, _ = sc.resolve(1)
    assert truth.marginal_variance == pytest.approx(4.0) and analysis == truth
    sc = Scenario.from_dict({
        "name": "s", "truth": {"kind": "ou", "phi": 0.1, "sigma2": 0.1}, "analysis": "iid",
        "sweep": {"axis": "sigma2", "values": [0.36], "coupling": "volatility"},
    })
    _, truth, analysis, _ = sc.resolve(0)
    assert truth.sigma2 == pytest.approx(0.36) and analysis.sigma2 == pytest.approx(1.8)
    sc = Scenario.from_dict({"name": "s", "truth": {"kind": "iid", "sigma2": 1.0},
                             "sweep": {"axis": "n_s", "values": [3, 7]}})
    assert sc.resolve(1)[3]["n_s"] == 7


def test_explicit_design_sweep():
    res = run_s3_perturbation(rows=((0, 20, 40, 60, 80), (0, 10, 20, 40, 80)), replicates=2, seed=0,
                              fit={"restarts": 3})
    assert res.mean_width.shape == (2, 3)
    assert [d["times"] for d in res.designs][1] == [0.0, 10.0, 20.0, 40.0, 80.0]


@pytest.mark.parametrize("text, needle", [
    ("name: x\ntruth: {kind: iid, sigma2: 1}\nbogus: 1\n", ":3: unknown field 'bogus'"),
    ("name: x\ntruth: {kind: iid, sigma2: 1}\nanalysis: iid\n", ":3: field 'analysis'"),
    ("name: x\ntruth: {kind: iid, sigma2: 1}\nreplicates: 0\n", ":3: field 'replicates'"),
    ("name: x\ntruth: {kind: iid, sigma2: 1}\ndesign:\n  source: magic\n", ":4: field 'design.source'"),
    ("name: x\ntruth: {kind: banana}\n", ":2: field 'truth'"),
    ("truth: {kind: iid, sigma2: 1}\n", "missing field 'name'"),
    ("name: x\n", "field 'truth'"),
    ("name: [x\n", "cfg.yaml"),
])
def test_config_errors_name_file_line_and_field(text, needle):
    with pytest.raises(ConfigError) as info:
        Scenario.from_yaml(text, "cfg.yaml")
    assert needle in str(info.value)
    assert str(info.value).startswith("cfg.yaml")


def test_cli_round_trip(tmp_path, capsys):
    data = tmp_path / "d.csv"
    assert main(["simulate", "--noise", "ou", "--variance", "9", "--seed", "3", "--out", str(data)]) == 0
    assert data.read_text().startswith("time,value\n")
    assert main(["fit", str(data), "--noise", "ou", "--variance", "9", "--restarts", "5"]) == 0
    fit = json.loads(capsys.readouterr().out)
    assert fit["converged"] and 0.1 < fit["r"] < 0.4
    assert main(["profile", str(data), "--param", "r", "--restarts", "5", "--out-dir", str(tmp_path / "p")]) == 0
    assert (tmp_path / "p" / "profile_r.csv").exists()
    capsys.readouterr()
    assert main(["design-fim", "--n-s", "3", "--restarts", "3", "--format", "csv"]) == 0
    assert len(capsys.readouterr().out.strip().split(",")) == 3


def test_cli_sobol_and_global(tmp_path, capsys):
    cache = tmp_path / "s.csv"
    assert main(["sobol-cache", "--n-base", "512", "--out", str(cache)]) == 0
    assert main(["design-global", "--n-s", "3", "--sobol-cache", str(cache)]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["kind"] == "global" and len(rec["times"]) == 3


def test_cli_scenario_and_errors(tmp_path, capsys):
    cfg = tmp_path / "s.yaml"
    cfg.write_text("name: t\ntruth: {kind: iid, sigma2: 9.0}\nreplicates: 2\nfit: {restarts: 3}\n")
    out = tmp_path / "out"
    assert main(["scenario", "run", str(cfg), "--out-dir", str(out), "--replicates", "1"]) == 0
    assert "replicates" in (out / "summary.csv").read_text()
    bad = tmp_path / "bad.yaml"
    bad.write_text("name: t\ntruth: {kind: iid, sigma2: 9.0}\nreplicate: 2\n")
    assert main(["scenario", "run", str(bad)]) == 2
    assert "bad.yaml:3" in capsys.readouterr().err
    assert main(["fit", str(tmp_path / "missing.csv")]) == 3
