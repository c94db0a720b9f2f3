import csv
import json

import numpy as np
import pytest

from chaincontrol.cli import (
    EXIT_BUDGET,
    EXIT_CONFIG,
    EXIT_DIVERGENCE,
    EXIT_OK,
    RunConfig,
    main,
)
from chaincontrol.systems import AffineSystem, ControlRange, dump_system


def run(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = main(["run", *args, "--out", str(out)])
    return code, out


def set_ids(path):
    with open(path, newline="") as fh:
        return {row["set_id"] for row in csv.DictReader(fh)}


def diagnostic(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_scalar_euclidean_example(tmp_path):
    code, out = run(tmp_path, "--scenario", "scalar_hyperbolic", "--pipeline", "euclidean",
                    "--depth", "8", "--T", "1", "--eps", "0.05")
    assert code == EXIT_OK
    assert len(set_ids(out / "chain_sets.csv")) == 1
    for name in ("graph.json", "report.json", "manifest.json", "summary.txt"):
        assert (out / name).is_file()
    assert list((out / "plots").glob("set_*.dat"))


def test_missing_system_file(tmp_path, capsys):
    code, _ = run(tmp_path, "--system-file", str(tmp_path / "absent.json"), "--pipeline", "euclidean",
                  "--eps", "0.1")
    assert code == EXIT_CONFIG
    assert diagnostic(capsys)["error"] == "config"


@pytest.mark.parametrize("args", [
    ["--pipeline", "strong-ladder"],
    ["--pipeline", "hemisphere"],
    ["--pipeline", "euclidean", "--eps", "0.1", "--T", "-1"],
    ["--pipeline", "euclidean", "--eps", "0.1", "--delta-ladder", "0.5", "0.1"],
    ["--pipeline", "nope"],
])
def test_config_errors(tmp_path, capsys, args):
    code, _ = run(tmp_path, "--scenario", "scalar_hyperbolic", *args)
    assert code == EXIT_CONFIG
    assert diagnostic(capsys)["error"] == "config"


def test_budget_error(tmp_path, capsys):
    code, _ = run(tmp_path, "--scenario", "example2", "--pipeline", "sphere", "--depth", "12", "--eps", "0.1")
    assert code == EXIT_BUDGET
    assert diagnostic(capsys)["error"] == "budget"


def test_divergence_dominated_run(tmp_path, capsys):
    path = tmp_path / "grow.json"
    dump_system(AffineSystem([[[3.0]]], [[0.0]], ControlRange.empty()), path)
    code, out = run(tmp_path, "--system-file", str(path), "--pipeline", "euclidean", "--depth", "5",
                    "--T", "2", "--eps", "0.01", "--window", "-1", "1")
    assert code == EXIT_DIVERGENCE
    assert diagnostic(capsys)["error"] == "divergence"
    assert (out / "report.json").is_file()


@pytest.mark.parametrize("args", [
    ["--scenario", "shear_flow", "--pipeline", "euclidean", "--depth", "5", "--eps", "0.2"],
    ["--scenario", "example2", "--pipeline", "sphere", "--depth", "4", "--T", "0.5", "--eps", "0.05"],
    ["--scenario", "scalar_hyperbolic", "--pipeline", "strong-ladder", "--depth", "6",
     "--delta-ladder", "0.2", "0.05"],
])
def test_threads_byte_identical(tmp_path, args):
    _, a = run(tmp_path, *args, "--threads", "1", name="a")
    _, b = run(tmp_path, *args, "--threads", "8", name="b")
    _, c = run(tmp_path, *args, "--threads", "1", name="c")
    for name in ("chain_sets.csv", "graph.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes() == (c / name).read_bytes()


def test_manifest_complete(tmp_path):
    _, out = run(tmp_path, "--scenario", "scalar_hyperbolic", "--pipeline", "euclidean", "--depth", "5",
                 "--eps", "0.05")
    man = json.loads((out / "manifest.json").read_text())
    assert set(man["config"]) == set(RunConfig.__dataclass_fields__) - {"resolved"}
    for key in ("depth", "T", "eps", "step", "controls", "samples_per_box", "inflation"):
        assert key in man["resolved"]
    assert man["seed"] == man["config"]["seed"]
    assert {"version", "system", "wall_time_s"} <= set(man)
    raw = (out / "manifest.json").read_bytes()
    assert b"\r\n" not in raw
    raw.decode("utf-8")


def test_flags_override_recommendations(tmp_path):
    _, out = run(tmp_path, "--scenario", "scalar_hyperbolic", "--pipeline", "euclidean", "--depth", "5",
                 "--eps", "0.05", "--controls", "3")
    man = json.loads((out / "manifest.json").read_text())
    assert man["resolved"]["depth"] == 5 and man["resolved"]["controls"] == 3
    assert man["resolved"]["T"] == 3.0


def test_monodromy_pipeline(tmp_path):
    code, out = run(tmp_path, "--scenario", "linear_3d", "--pipeline", "monodromy")
    assert code == EXIT_OK
    rep = json.loads((out / "report.json").read_text())
    assert rep["has_unit_eigenvalue"] is True
    ev = np.array(rep["eigenvalues"])
    assert np.min(np.abs(ev[:, 0] + 1j * ev[:, 1] - 1)) < 1e-9


def test_conjugacy_pipeline(tmp_path):
    code, out = run(tmp_path, "--scenario", "example2", "--pipeline", "conjugacy", "--samples", "10")
    assert code == EXIT_OK
    assert json.loads((out / "report.json").read_text())["max_residual"] < 1e-6


def test_hemisphere_and_projective_pipelines(tmp_path):
    code, out = run(tmp_path, "--scenario", "example2", "--pipeline", "projective", "--depth", "4",
                    "--T", "0.5", "--eps", "0.05")
    assert code == EXIT_OK
    assert "central_scc_count" in json.loads((out / "report.json").read_text())
    code, out = run(tmp_path, "--scenario", "shear_flow", "--pipeline", "hemisphere", "--depth", "4",
                    "--open", name="hemi")
    assert code == EXIT_OK
    assert list((out / "plots").glob("*.sphere.dat"))


def test_graph_edge_cap(tmp_path):
    _, out = run(tmp_path, "--scenario", "shear_flow", "--pipeline", "euclidean", "--depth", "4",
                 "--eps", "0.2", "--max-graph-edges", "10")
    doc = json.loads((out / "graph.json").read_text())
    assert doc["edges"] == [] and doc["edge_count"] > 10
    assert doc["node_count"] == len(doc["nodes"])


def test_scenario_export(tmp_path, capsys):
    assert main(["scenario", "example2", "--out", str(tmp_path)]) == EXIT_OK
    path = tmp_path / "example2.system.json"
    assert path.is_file()
    code, _ = run(tmp_path, "--system-file", str(path), "--pipeline", "monodromy", "--u", "0.5")
    assert code == EXIT_OK


def test_version_flag(capsys):
    assert main(["--version"]) == 0
    assert "chaincontrol" in capsys.readouterr().out
