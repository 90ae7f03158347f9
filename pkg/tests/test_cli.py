import json

import numpy as np
import pytest

from degensl import io
from degensl.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, main

SMALL_INVERSE = {"target": "target.json", "grid_points": 513, "truncation_M": 32}


def _run(tmp_path, command, cfg, out="out", name=None):
    path = tmp_path / (name or f"{command}.json")
    path.write_text(json.dumps(cfg))
    code = main([command, "--config", str(path), "--out", str(tmp_path / out)])
    return code, tmp_path / out


def _report(out):
    return json.loads((out / "report.json").read_text())


@pytest.fixture
def target_dir(tmp_path):
    (tmp_path / "target.json").write_text(json.dumps({"sine_coeffs": [[0.01, 0.0]], "m": 0}))
    return tmp_path


def test_eig_free_dirichlet(tmp_path):
    code, out = _run(tmp_path, "eig", {"potential": "zero", "det": "dirichlet",
                                       "region": {"re": [0.5, 4.5], "im": [-1, 1]}})
    assert code == EXIT_OK
    eigs = json.loads((out / "eigs.json").read_text())
    assert [round(e["mu"][0], 9) for e in eigs] == [1, 2, 3, 4]
    assert all(e["multiplicity"] == 1 for e in eigs)
    assert (out / "eigs.png").is_file()
    assert _report(out)["count"] == 4


@pytest.mark.parametrize("name, flagged", [("cos2x", True), ("linear", False)])
def test_det_scan_flags_degenerate(tmp_path, name, flagged):
    code, out = _run(tmp_path, "det-scan", {"potential": name, "scan_points": 100,
                                            "region": {"re": [0.5, 20.5], "im": [0, 0]}})
    assert code == EXIT_OK
    header, data = io.read_csv(out / "det_scan.csv")
    assert header == ["mu_re", "mu_im", "delta_re", "delta_im"]
    assert data.shape == (100, 4)
    rep = _report(out)
    assert ("degenerate determinant" in rep["flags"]) is flagged
    if flagged:
        assert np.max(np.hypot(data[:, 2], data[:, 3])) <= 1e-7


def test_det_scan_two_dimensional(tmp_path):
    code, out = _run(tmp_path, "det-scan", {"potential": "linear", "det": "dirichlet", "scan_points": [5, 3],
                                            "region": {"re": [0.5, 2.5], "im": [-1, 1]}, "figures": False})
    assert code == EXIT_OK
    _, data = io.read_csv(out / "det_scan.csv")
    assert data.shape == (15, 4)
    assert not (out / "det_scan.png").exists()


def test_forward(tmp_path):
    code, out = _run(tmp_path, "forward", {"potential": "complex-linear", "grid_points": 257,
                                           "mu": [[0.5, 0.5], [3.0, 0.0]]})
    assert code == EXIT_OK
    header, data = io.read_csv(out / "endpoints.csv")
    assert data.shape[0] == 2
    assert np.all(data[:, header.index("wronskian_defect")] <= 1e-8)
    _, fund = io.read_csv(out / "fundamental.csv")
    assert fund.shape == (257, 9)


def test_green_command(tmp_path):
    code, out = _run(tmp_path, "green", {"potential": "linear", "grid_points": 513, "mu": [0.5, 0.5],
                                         "asymptotic_mu": [40]})
    assert code == EXIT_OK
    rep = _report(out)
    assert all(c["passed"] for c in rep["checks"].values())
    assert rep["asymptotic_defect"][0][1] <= 0.1
    header, data = io.read_csv(out / "green.csv")
    assert header == ["x", "xi", "g_re", "g_im"] and data.shape[0] <= 129 * 129


def test_projections_command(tmp_path):
    code, out = _run(tmp_path, "projections", {"potential": "linear", "grid_points": 513, "n_eigs": 3,
                                               "region": {"re": [0.5, 6.5], "im": [-1, 1]}})
    assert code == EXIT_OK
    header, data = io.read_csv(out / "proj_norms.csv")
    assert header == ["n", "re_lambda", "im_lambda", "multiplicity", "proj_norm"]
    assert list(data[:, 0]) == [1, 2, 3]
    assert np.all(np.diff(data[:, 1]) > 0)
    assert np.all(data[:, 4] >= 1 - 1e-3)


def test_diag_command(tmp_path):
    code, out = _run(tmp_path, "diag", {"potential": "cos2x", "grid_points": 513})
    assert code == EXIT_OK
    rep = _report(out)
    assert rep["completeness"]["verdict"] == "likely-incomplete"
    assert rep["flags"] == ["degenerate determinant"]


def test_inverse_then_verify_round_trip(target_dir):
    code, out = _run(target_dir, "inverse", SMALL_INVERSE)
    assert code == EXIT_OK
    inv = _report(out)
    header, q = io.read_csv(out / "q_hat.csv")
    assert header == ["x", "q_re", "q_im"] and q.shape == (513, 3)
    header, res = io.read_csv(out / "residuals.csv")
    assert header == ["mu", "re_residual", "im_residual"]
    assert res.shape[0] == 2 * 32
    code, vout = _run(target_dir, "verify", {"target": "target.json", "truncation_M": 32,
                                             "q_hat": "out/q_hat.csv"}, out="vout")
    assert code == EXIT_OK
    ver = _report(vout)
    assert ver["checks"]["roundtrip"]["value"] <= 1e-12
    a = np.array(inv["residual_table"])
    b = np.array(ver["residual_table"])
    assert np.max(np.abs(a - b)) <= 1e-12


def test_verify_without_stored_report(target_dir):
    _run(target_dir, "inverse", SMALL_INVERSE)
    (target_dir / "out" / "report.json").unlink()
    code, out = _run(target_dir, "verify", {"target": "target.json", "truncation_M": 32}, out="out")
    assert code == EXIT_OK
    assert "roundtrip" not in _report(out)["checks"]


def test_inverse_is_byte_identical(target_dir):
    _run(target_dir, "inverse", SMALL_INVERSE, out="a")
    _run(target_dir, "inverse", SMALL_INVERSE, out="b")
    files = sorted(p.name for p in (target_dir / "a").iterdir())
    assert "q_hat.png" in files
    for name in files:
        assert (target_dir / "a" / name).read_bytes() == (target_dir / "b" / name).read_bytes(), name


def test_missing_config_exit_2(tmp_path):
    assert main(["eig", "--config", str(tmp_path / "nope.json")]) == EXIT_VALIDATION


def test_missing_potential_file_exit_2(tmp_path):
    code, _ = _run(tmp_path, "diag", {"potential": "absent.json"})
    assert code == EXIT_VALIDATION


def test_bad_command_exit_2(tmp_path):
    assert main(["plot", "--config", "x.json"]) == EXIT_VALIDATION


def test_numerical_failure_exit_3(tmp_path):
    code, out = _run(tmp_path, "green", {"potential": "cos2x", "grid_points": 257, "mu": [0.5, 0.5]})
    assert code == EXIT_NUMERICAL
    rep = _report(out)
    assert rep["status"] == "error"
    assert rep["error"]["type"] == "DegenerateDeterminantError"


def test_missed_tolerance_exit_3(target_dir):
    cfg = dict(SMALL_INVERSE, tolerances={"residual": 1e-14})
    code, out = _run(target_dir, "inverse", cfg)
    assert code == EXIT_NUMERICAL
    rep = _report(out)
    assert rep["error"]["type"] == "ToleranceExceeded"
    assert not rep["checks"]["residual"]["passed"]
    assert (out / "q_hat.csv").is_file()
