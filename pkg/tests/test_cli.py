import csv
import json
import os
import subprocess

import numpy as np
import pytest
import yaml

from helpers import linear_scm
from mechshift import (
    Dag,
    EnvSample,
    MultiEnvDataset,
    load_multi_env,
    parse_graph,
    save_multi_env,
    write_graph,
)
from mechshift.cli import _data_paths, main, parse_overrides


def write_config(tmp_path, doc, name="config.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(doc))
    return str(path)


def read_manifest(out_dir):
    with open(os.path.join(out_dir, "manifest.json"), encoding="utf-8") as fh:
        return json.load(fh)


def sim_doc(out, seed=11):
    return {
        "sim": {
            "num_vars": 3,
            "n_env": 3,
            "density": 1.0,
            "shift_count": 1,
            "n_samples": 30,
            "seed": seed,
        },
        "out": out,
    }


@pytest.fixture()
def simulated(tmp_path):
    out = str(tmp_path / "run")
    cfg = write_config(tmp_path, sim_doc(out))
    assert main(["simulate", "--config", cfg]) == 0
    return out


# -- overrides and config plumbing --------------------------------------------

def test_parse_overrides_forms():
    pairs = parse_overrides(["--sim.seed=3", "--sim.density", "0.5"])
    assert pairs == [("sim.seed", 3), ("sim.density", 0.5)]


def test_parse_overrides_rejects_stray_token():
    with pytest.raises(Exception, match="unrecognized"):
        parse_overrides(["positional"])
    with pytest.raises(Exception, match="missing a value"):
        parse_overrides(["--sim.seed"])


def test_override_changes_manifest(tmp_path):
    out = str(tmp_path / "run")
    cfg = write_config(tmp_path, sim_doc(out, seed=11))
    assert main(["simulate", "--config", cfg, "--sim.seed=3"]) == 0
    manifest = read_manifest(out)
    assert manifest["seed"] == 3
    assert manifest["config"]["sim"]["seed"] == 3


def test_override_space_form_equivalent(tmp_path):
    out_a = str(tmp_path / "a")
    out_b = str(tmp_path / "b")
    cfg = write_config(tmp_path, sim_doc("placeholder"))
    assert main(["simulate", "--config", cfg, "--out", out_a, "--sim.seed=3"]) == 0
    assert main(["simulate", "--config", cfg, "--out", out_b, "--sim.seed", "3"]) == 0
    a, b = read_manifest(out_a), read_manifest(out_b)
    assert a["config"]["sim"] == b["config"]["sim"]
    with open(os.path.join(out_a, "env_0.csv")) as fa:
        with open(os.path.join(out_b, "env_0.csv")) as fb:
            assert fa.read() == fb.read()


def test_config_hash_tracks_content(tmp_path):
    out_a = str(tmp_path / "a")
    out_b = str(tmp_path / "b")
    out_c = str(tmp_path / "c")
    cfg = write_config(tmp_path, sim_doc("placeholder"))
    main(["simulate", "--config", cfg, "--out", out_a])
    main(["simulate", "--config", cfg, "--out", out_b])
    main(["simulate", "--config", cfg, "--out", out_c, "--sim.seed=99"])
    assert read_manifest(out_a)["config_sha256"] == read_manifest(out_b)["config_sha256"]
    assert read_manifest(out_a)["config_sha256"] != read_manifest(out_c)["config_sha256"]


def test_unknown_key_fails_before_output(tmp_path, capsys):
    out = str(tmp_path / "run")
    cfg = write_config(tmp_path, sim_doc(out))
    assert main(["simulate", "--config", cfg, "--sim.bogus=1"]) == 1
    assert "error:" in capsys.readouterr().err
    assert not os.path.exists(out)


def test_missing_config_file(tmp_path, capsys):
    assert main(["simulate", "--config", str(tmp_path / "nope.yaml")]) == 1
    assert "cannot read config" in capsys.readouterr().err


def test_config_must_be_mapping(tmp_path, capsys):
    path = tmp_path / "list.yaml"
    path.write_text("- 1\n- 2\n")
    assert main(["simulate", "--config", str(path)]) == 1
    assert "top level" in capsys.readouterr().err


def test_out_required(tmp_path, capsys):
    cfg = write_config(tmp_path, {"sim": sim_doc("x")["sim"]})
    assert main(["simulate", "--config", cfg]) == 1
    assert "output directory" in capsys.readouterr().err


# -- simulate ------------------------------------------------------------------

def test_simulate_outputs(simulated):
    names = sorted(os.listdir(simulated))
    assert names == [
        "env_0.csv", "env_1.csv", "env_2.csv",
        "manifest.json", "scenario.json", "truth_dag.json",
    ]
    dataset = load_multi_env(
        [os.path.join(simulated, f"env_{e}.csv") for e in range(3)]
    )
    assert dataset.env(0).values.shape == (30, 3)
    with open(os.path.join(simulated, "truth_dag.json")) as fh:
        truth = parse_graph(fh.read())
    assert isinstance(truth, Dag)
    assert len(truth.edges) == 3
    manifest = read_manifest(simulated)
    assert manifest["command"] == "simulate"
    assert manifest["seed"] == 11
    assert set(manifest["versions"]) == {
        "python", "mechshift", "numpy", "scipy", "sklearn"
    }


def test_simulate_reproducible(tmp_path):
    out_a = str(tmp_path / "a")
    out_b = str(tmp_path / "b")
    cfg = write_config(tmp_path, sim_doc("placeholder"))
    main(["simulate", "--config", cfg, "--out", out_a])
    main(["simulate", "--config", cfg, "--out", out_b])
    for name in ("env_0.csv", "env_1.csv", "env_2.csv", "truth_dag.json",
                 "scenario.json"):
        with open(os.path.join(out_a, name)) as fa:
            with open(os.path.join(out_b, name)) as fb:
                assert fa.read() == fb.read()


# -- discover ------------------------------------------------------------------

def test_discover_oracle_on_simulated(simulated, tmp_path):
    out = str(tmp_path / "disc")
    cfg = write_config(tmp_path, {
        "discover": {
            "data": simulated,
            "source": "truth",
            "dag": os.path.join(simulated, "truth_dag.json"),
            "scenario": os.path.join(simulated, "scenario.json"),
            "test": "oracle",
        },
        "out": out,
    }, name="discover.yaml")
    assert main(["discover", "--config", cfg]) == 0
    manifest = read_manifest(out)
    assert manifest["command"] == "discover"
    assert manifest["n_candidates"] == 6  # complete 3-vertex class
    assert manifest["n_failures"] == 0
    assert manifest["outputs"] == ["cpdag.json", "metrics.csv", "report.json"]
    with open(os.path.join(out, "report.json")) as fh:
        report = json.load(fh)
    assert len(report["dags"]) == 6
    with open(os.path.join(simulated, "truth_dag.json")) as fh:
        truth = parse_graph(fh.read())
    truth_edges = sorted([i, j] for i, j in truth.edges)
    assert truth_edges in manifest["argmin_edges"]
    with open(os.path.join(out, "metrics.csv")) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1
    assert rows[0]["skeleton_match"] == "1"
    assert float(rows[0]["precision"]) == 1.0


def test_discover_provided_dag_pattern(simulated, tmp_path):
    # A fully directed pattern file leaves exactly one candidate.
    out = str(tmp_path / "disc")
    truth_path = os.path.join(simulated, "truth_dag.json")
    cfg = write_config(tmp_path, {
        "discover": {
            "data": simulated,
            "source": "cpdag",
            "cpdag": truth_path,
            "dag": truth_path,
            "test": "fisher_z",
        },
        "out": out,
    }, name="discover.yaml")
    assert main(["discover", "--config", cfg]) == 0
    manifest = read_manifest(out)
    assert manifest["n_candidates"] == 1
    assert manifest["argmin"] == [0]
    assert manifest["argmin_unique"] is True
    with open(os.path.join(out, "metrics.csv")) as fh:
        rows = list(csv.DictReader(fh))
    assert rows[0]["f1"] == "1.0"


def test_discover_pooled_pc_writes_pattern(tmp_path):
    rng = np.random.default_rng(4)
    coeffs = {(0, 1): 2.0}
    dataset = MultiEnvDataset(("x0", "x1"), (
        EnvSample(0, linear_scm(coeffs, 2, 500, rng)),
        EnvSample(1, linear_scm(coeffs, 2, 500, rng, means={0: 3.0})),
    ))
    data_dir = str(tmp_path / "data")
    save_multi_env(dataset, data_dir)
    out = str(tmp_path / "disc")
    cfg = write_config(tmp_path, {
        "discover": {"data": data_dir, "source": "pooled-pc", "test": "fisher_z"},
        "out": out,
    })
    assert main(["discover", "--config", cfg]) == 0
    with open(os.path.join(out, "pattern.json")) as fh:
        pattern = parse_graph(fh.read())
    assert pattern.directed == frozenset({(0, 1)})
    manifest = read_manifest(out)
    assert "pattern.json" in manifest["outputs"]
    assert "metrics.csv" not in manifest["outputs"]  # no truth given


def test_discover_validation_precedes_output(tmp_path, capsys):
    out = str(tmp_path / "disc")
    cfg = write_config(tmp_path, {
        "discover": {"data": "wherever", "test": "chi2"},
        "out": out,
    })
    assert main(["discover", "--config", cfg]) == 1
    assert "unknown test" in capsys.readouterr().err
    assert not os.path.exists(out)


def test_discover_oracle_needs_scenario(simulated, tmp_path, capsys):
    out = str(tmp_path / "disc")
    cfg = write_config(tmp_path, {
        "discover": {
            "data": simulated,
            "dag": os.path.join(simulated, "truth_dag.json"),
            "test": "oracle",
        },
        "out": out,
    })
    assert main(["discover", "--config", cfg]) == 1
    assert "scenario" in capsys.readouterr().err
    assert not os.path.exists(out)


def test_data_dir_sorted_numerically(tmp_path):
    d = tmp_path / "data"
    d.mkdir()
    for k in (0, 2, 10):
        (d / f"env_{k}.csv").write_text("x0\n1.0\n")
    (d / "notes.txt").write_text("ignored")
    paths = _data_paths(str(d))
    assert [os.path.basename(p) for p in paths] == [
        "env_0.csv", "env_2.csv", "env_10.csv"
    ]


# -- oracle sweep ---------------------------------------------------------------

def oracle_doc(out):
    return {
        "oracle": {
            "axis": "n_env",
            "values": [3],
            "repetitions": 4,
            "num_vars": 3,
            "density": 0.7,
            "seed": 5,
        },
        "out": out,
    }


def test_oracle_sweep_single_cell(tmp_path):
    out = str(tmp_path / "sweep")
    cfg = write_config(tmp_path, oracle_doc(out))
    assert main(["oracle", "--config", cfg]) == 0
    with open(os.path.join(out, "curves.csv")) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    assert header == ["axis", "value", "method", "mean_recall", "lo95", "hi95",
                      "repetitions"]
    assert [r[2] for r in rows] == ["mss_oracle", "pooled_pc_oracle"]
    for row in rows:
        assert row[0] == "n_env" and row[1] == "3" and row[6] == "4"
        mean, lo, hi = float(row[3]), float(row[4]), float(row[5])
        assert 0.0 <= lo <= mean <= hi <= 1.0
    manifest = read_manifest(out)
    assert manifest["axis"] == "n_env"
    assert manifest["values"] == [3]


def test_oracle_sweep_deterministic(tmp_path):
    out_a = str(tmp_path / "a")
    out_b = str(tmp_path / "b")
    cfg = write_config(tmp_path, oracle_doc("placeholder"))
    main(["oracle", "--config", cfg, "--out", out_a])
    main(["oracle", "--config", cfg, "--out", out_b])
    with open(os.path.join(out_a, "curves.csv")) as fa:
        with open(os.path.join(out_b, "curves.csv")) as fb:
            assert fa.read() == fb.read()


def test_oracle_bad_axis(tmp_path, capsys):
    out = str(tmp_path / "sweep")
    doc = oracle_doc(out)
    doc["oracle"]["axis"] = "noise"
    cfg = write_config(tmp_path, doc)
    assert main(["oracle", "--config", cfg]) == 1
    assert "unknown axis" in capsys.readouterr().err
    assert not os.path.exists(out)


def test_oracle_bad_cell_value(tmp_path, capsys):
    out = str(tmp_path / "sweep")
    doc = oracle_doc(out)
    doc["oracle"]["values"] = [3, 0]  # zero environments is invalid
    cfg = write_config(tmp_path, doc)
    assert main(["oracle", "--config", cfg]) == 1
    assert "n_env" in capsys.readouterr().err
    assert not os.path.exists(out)


# -- bounds ---------------------------------------------------------------------

def test_bounds_prints_exact_values(capsys):
    code = main([
        "bounds", "--n-env", "10", "--mec-size", "3",
        "--rho-lb", "0.5", "0.5", "0.5", "--rho-ub", "0.5", "0.5", "0.5",
    ])
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines == [
        "parent_recovery_bound 0.7626953125",
        "graph_recovery_bound 0.2880859375",
    ]


def test_bounds_rejects_extras(capsys):
    code = main([
        "bounds", "--n-env", "4", "--mec-size", "2",
        "--rho-lb", "0.5", "--rho-ub", "0.5", "--sim.seed=1",
    ])
    assert code == 1
    assert "unrecognized" in capsys.readouterr().err


def test_bounds_writes_nothing(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    main(["bounds", "--n-env", "4", "--mec-size", "2",
          "--rho-lb", "0.5", "--rho-ub", "0.5"])
    capsys.readouterr()
    assert os.listdir(tmp_path) == []


# -- installed entry point --------------------------------------------------------

def test_console_script_runs():
    proc = subprocess.run(
        ["mechshift", "bounds", "--n-env", "10", "--mec-size", "3",
         "--rho-lb", "0.5", "--rho-ub", "0.5"],
        capture_output=True, text=True, timeout=60,
    )
    assert proc.returncode == 0
    assert "parent_recovery_bound 0.7626953125" in proc.stdout
