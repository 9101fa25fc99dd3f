import csv
import json
from pathlib import Path

import numpy as np
import pytest

from dirac_graph.cli import CONFIG_SCHEMA, main

BASE_CFG = {
    "graph": {"kind": "chain"},
    "closure_cells": [12],
    "nodes_per_edge": 12,
    "problem": {"a": 1.0, "omega": 0.0, "V": {"kind": "constant", "value": 0.0}},
    "nonlinearity": {"kind": "power", "p": 2.5},
    "bands": {"num_thetas": 12, "num_bands": 4},
    "seed": 0,
}


def write_cfg(tmp_path, name="cfg.json", **overrides):
    cfg = json.loads(json.dumps(BASE_CFG))
    for key, val in overrides.items():
        if isinstance(val, dict) and isinstance(cfg.get(key), dict):
            cfg[key].update(val)
        else:
            cfg[key] = val
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def test_bands_success_and_outputs(tmp_path):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "out"
    assert main(["bands", "--config", str(cfg), "--out", str(out)]) == 0
    assert (out / "bands.csv").exists()
    assert (out / "bands.png").exists()
    rep = json.loads((out / "gap_report.json").read_text())
    assert rep["lemma31_pass"] and rep["lemma33_pass"]
    assert rep["min_abs_lambda"] == pytest.approx(1.0, abs=1e-9)
    assert "config" in rep
    with open(out / "bands.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["theta_1", "band_index", "lambda"]
    assert len(rows) == 1 + 12 * 4


def test_bands_constant_potential(tmp_path):
    cfg = write_cfg(tmp_path, problem={"V": {"kind": "constant", "value": 0.5}})
    out = tmp_path / "out"
    assert main(["bands", "--config", str(cfg), "--out", str(out)]) == 0
    rep = json.loads((out / "gap_report.json").read_text())
    assert rep["min_abs_lambda"] == pytest.approx(1.5, abs=1e-6)


def test_malformed_config_exit2(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({**BASE_CFG, "nodes_per_edge": "many"}))
    assert main(["bands", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
    path2 = tmp_path / "nojson.json"
    path2.write_text("{not json")
    assert main(["bands", "--config", str(path2), "--out", str(tmp_path / "o")]) == 2
    assert main(["bands", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path / "o")]) == 2


def test_solve_writes_state_files(tmp_path):
    cfg = write_cfg(tmp_path, solve={"tol": 1e-9})
    out = tmp_path / "out"
    assert main(["solve", "--config", str(cfg), "--out", str(out)]) == 0
    state = json.loads((out / "state_0.json").read_text())
    assert state["residual"] < 1e-9
    assert state["omega"] == 0.0
    assert state["N"] == [12]
    assert state["p_or_b"] == {"kind": "power", "p": 2.5}
    assert (out / "state_0.csv").exists()
    assert (out / "state_0.png").exists()
    assert (out / "residual_report.json").exists()


def test_solve_deflate_distinctness_matrix(tmp_path):
    cfg = write_cfg(
        tmp_path,
        graph={"kind": "decorated_chain", "params": {"L": 1.0}},
        closure_cells=[10],
        nodes_per_edge=8,
    )
    out = tmp_path / "out"
    assert main(["solve", "--config", str(cfg), "--deflate", "2", "--out", str(out)]) == 0
    with open(out / "distinctness_matrix.csv") as fh:
        rows = list(csv.reader(fh))[1:]
    offdiag = [float(r[2]) for r in rows if r[0] != r[1]]
    assert all(d > 0.1 for d in offdiag)


def test_solve_hypothesis_gate_exit3(tmp_path):
    cfg = write_cfg(tmp_path, problem={"omega": 1.5})
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3


def test_asym_linear_gate_failure_exit3(tmp_path):
    # slope below sup V + a + omega is rejected by the hypothesis gate
    cfg = write_cfg(tmp_path, nonlinearity={"kind": "asym_linear", "b": 0.5})
    cfg_obj = json.loads(cfg.read_text())
    cfg_obj["nonlinearity"].pop("p", None)
    cfg.write_text(json.dumps(cfg_obj))
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3


def test_verify_interpolation(tmp_path):
    cfg = write_cfg(tmp_path, closure_cells=[6], nodes_per_edge=8)
    out = tmp_path / "out"
    assert main(["verify", "--config", str(cfg), "--which", "interpolation", "--out", str(out)]) == 0
    rep = json.loads((out / "verify_interpolation.json").read_text())
    assert abs(rep["C_theta"] - np.pi) <= 1e-6
    assert rep["max_ratio_error"] <= 1e-3


def test_verify_cutoff(tmp_path):
    cfg = write_cfg(tmp_path, verify={"cutoff_cells": [16, 32, 64]}, nodes_per_edge=8)
    out = tmp_path / "out"
    assert main(["verify", "--config", str(cfg), "--which", "cutoff", "--out", str(out)]) == 0
    rep = json.loads((out / "verify_cutoff.json").read_text())
    for ratio in rep["halving_ratios"]:
        assert 1 / 2.4 <= ratio <= 1 / 1.6
    assert (out / "verify_cutoff.png").exists()


def test_verify_norms(tmp_path):
    cfg = write_cfg(tmp_path, closure_cells=[8], nodes_per_edge=8, problem={"omega": 0.3})
    out = tmp_path / "out"
    assert main(["verify", "--config", str(cfg), "--which", "norms", "--out", str(out)]) == 0
    rep = json.loads((out / "verify_norms.json").read_text())
    assert rep["corpus"]["violations"] == 0


def test_verify_hypotheses(tmp_path):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "out"
    assert main(["verify", "--config", str(cfg), "--which", "hypotheses", "--out", str(out)]) == 0
    rep = json.loads((out / "verify_hypotheses.json").read_text())
    assert rep["pass"]
    assert rep["theorem_set"] == list(("omega", "V1", "F0", "F1", "F2", "F5", "F6", "F7"))


def test_verify_gn(tmp_path):
    cfg = write_cfg(tmp_path, closure_cells=[6], nodes_per_edge=8, verify={"num_fields": 40})
    out = tmp_path / "out"
    assert main(["verify", "--config", str(cfg), "--which", "gn", "--out", str(out)]) == 0


def test_determinism_same_seed_identical_json(tmp_path):
    cfg = write_cfg(tmp_path, closure_cells=[6], nodes_per_edge=8)
    out1 = tmp_path / "o1"
    out2 = tmp_path / "o2"
    for out in (out1, out2):
        assert main(["verify", "--config", str(cfg), "--which", "interpolation", "--out", str(out)]) == 0
    assert (out1 / "verify_interpolation.json").read_bytes() == (out2 / "verify_interpolation.json").read_bytes()
    for out in (out1, out2):
        assert main(["bands", "--config", str(cfg), "--out", str(out)]) == 0
    assert (out1 / "gap_report.json").read_bytes() == (out2 / "gap_report.json").read_bytes()


def test_graph_from_json_path(tmp_path):
    from dirac_graph import build_example

    gpath = tmp_path / "graph.json"
    build_example("ladder").save_json(gpath)
    cfg = write_cfg(tmp_path, graph={"path": str(gpath)}, closure_cells=[6], nodes_per_edge=6)
    out = tmp_path / "out"
    assert main(["bands", "--config", str(cfg), "--out", str(out)]) == 0


def test_config_schema_in_docs_matches_code():
    docs = Path(__file__).resolve().parents[1] / "docs" / "config.schema.json"
    assert json.loads(docs.read_text()) == CONFIG_SCHEMA


def test_config_defaults_embedded(tmp_path):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "out"
    main(["bands", "--config", str(cfg), "--out", str(out)])
    rep = json.loads((out / "gap_report.json").read_text())
    # resolved config embeds defaults for sections the file omitted
    assert rep["config"]["solve"]["tol"] == 1e-9
    assert rep["config"]["output_dir"] == "out"


def test_bands_square_lattice_two_theta_columns(tmp_path):
    cfg = write_cfg(
        tmp_path,
        graph={"kind": "square_lattice"},
        closure_cells=[3, 3],
        nodes_per_edge=8,
        bands={"num_thetas": 9, "num_bands": 4},
    )
    out = tmp_path / "out"
    assert main(["bands", "--config", str(cfg), "--out", str(out)]) == 0
    with open(out / "bands.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["theta_1", "theta_2", "band_index", "lambda"]
    rep = json.loads((out / "gap_report.json").read_text())
    assert rep["min_abs_lambda"] == pytest.approx(1.0, abs=1e-6)


def test_verify_gap_writes_report(tmp_path):
    cfg = write_cfg(tmp_path, closure_cells=[8], nodes_per_edge=8)
    out = tmp_path / "out"
    assert main(["verify", "--config", str(cfg), "--which", "gap", "--out", str(out)]) == 0
    rep = json.loads((out / "verify_gap.json").read_text())
    assert rep["pass"]
    assert (out / "gap_report.json").exists()
