import json
import subprocess
import sys

import pytest

from subfreq.cli import (
    EXIT_CONFIG,
    EXIT_FAILED,
    EXIT_INAPPLICABLE,
    EXIT_NOT_CONVERGED,
    EXIT_OK,
    main,
    suite_exit_code,
)

BASE = {
    "family": {"kind": "euclidean", "n": 2},
    "domain": {"kind": "box", "bounds": [[0, 1], [0, 1]], "shape": [13, 13]},
    "p": 2.5,
    "seed": 3,
}


def _write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def _merge(**extra):
    cfg = json.loads(json.dumps(BASE))
    for key, value in extra.items():
        cfg[key] = value
    return cfg


@pytest.fixture(autouse=True)
def _no_env_out(monkeypatch):
    monkeypatch.delenv("SUBFREQ_OUT", raising=False)


def run(tmp_path, cfg, *args):
    out = tmp_path / "out"
    code = main([args[0], "--config", _write(tmp_path, cfg), "--out", str(out), *args[1:]])
    return code, out


def test_solve_writes_artifacts(tmp_path):
    code, out = run(tmp_path, BASE, "solve")
    assert code == EXIT_OK
    data = json.loads((out / "eigenpair.json").read_text())
    assert data["command"] == "solve" and data["converged"] is True
    assert list(data)[-1] == "timestamp"
    assert (out / "u1.csv").exists() and (out / "u1.pgm").exists()


def test_iteration_cap_exits_not_converged(tmp_path):
    code, _ = run(tmp_path, _merge(solver={"max_iterations": 1}), "solve")
    assert code == EXIT_NOT_CONVERGED


@pytest.mark.parametrize(
    "text",
    ['{"family": {"kind": "euclidean", "n": 2},', "[1, 2]"],
)
def test_malformed_config(tmp_path, capsys, text):
    path = tmp_path / "bad.json"
    path.write_text(text)
    assert main(["solve", "--config", str(path), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "error:" in capsys.readouterr().err


@pytest.mark.parametrize(
    "cfg, fragment",
    [
        (_merge(colour="red"), "colour"),
        (_merge(p=1.0), "p"),
        (_merge(family={"kind": "heisenberg"}), "needs 'n'"),
        (_merge(family={"kind": "heisenberg", "n": 1}), "dimensions"),
        (_merge(domain={"kind": "ball", "bounds": [[0, 1], [0, 1]], "shape": [9, 9]}), "center"),
        (_merge(solver={"precond_floor_min": 1.0}), "precond_floor"),
    ],
)
def test_invalid_config_values(tmp_path, capsys, cfg, fragment):
    code, _ = run(tmp_path, cfg, "solve")
    assert code == EXIT_CONFIG
    assert fragment in capsys.readouterr().err


def test_missing_config_file_and_bad_arguments(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG
    assert main(["frobnicate"]) == EXIT_CONFIG
    assert main(["verify", "--config", _write(tmp_path, BASE), "--check", "nonsense"]) == EXIT_CONFIG
    assert main(["solve", "--config", _write(tmp_path, BASE), "--seed", "-1"]) == EXIT_CONFIG


def test_caccioppoli_q_at_p_minus_one_is_a_config_error(tmp_path):
    cfg = _merge(checks={"caccioppoli": {"q_grid": [1.5]}})
    code, out = run(tmp_path, cfg, "verify", "--check", "caccioppoli")
    assert code == EXIT_CONFIG
    assert not (out / "report.json").exists()


def test_non_nested_monotonicity_is_a_config_error(tmp_path):
    cfg = _merge(
        family={"kind": "euclidean", "n": 1},
        domain={"kind": "subbox", "bounds": [[0, 1]], "shape": [33], "inner": [[0, 0.5]]},
        checks={
            "monotonicity": {
                "subdomain": {"kind": "subbox", "bounds": [[0, 1]], "shape": [33], "inner": [[0.25, 0.75]]}
            }
        },
    )
    code, _ = run(tmp_path, cfg, "verify", "--check", "monotonicity")
    assert code == EXIT_CONFIG


def test_scaling_without_dilation_is_a_config_error(tmp_path):
    cfg = _merge(
        family={"kind": "custom", "spec": {"ambient_dim": 2, "fields": [["1", "0"], ["0", "1 + x1^2"]]}}
    )
    code, _ = run(tmp_path, cfg, "verify", "--check", "scaling")
    assert code == EXIT_CONFIG


def test_verify_pass_and_report(tmp_path):
    code, out = run(tmp_path, BASE, "verify", "--check", "barta")
    assert code == EXIT_OK
    rep = json.loads((out / "report.json").read_text())
    assert rep["check"] == "barta" and rep["exit_code"] == 0 and rep["report"]["pass"] is True


def test_impossible_tolerance_fails(tmp_path):
    cfg = _merge(checks={"simplicity": {"tol_defect": 0.0, "tol_spread": 0.0, "restarts": 2}})
    code, _ = run(tmp_path, cfg, "verify", "--check", "simplicity")
    assert code == EXIT_FAILED


def test_off_eigenvalue_uniqueness_is_inapplicable(tmp_path):
    cfg = _merge(checks={"uniqueness": {"scale": 1.05}})
    code, _ = run(tmp_path, cfg, "verify", "--check", "uniqueness")
    assert code == EXIT_INAPPLICABLE


def test_empty_suite_is_a_config_error(tmp_path):
    code, _ = run(tmp_path, _merge(suite=[]), "suite")
    assert code == EXIT_CONFIG


def test_suite_runs_every_check_and_aggregates(tmp_path):
    cfg = _merge(
        suite=["picone", "uniqueness", "caccioppoli"],
        checks={"uniqueness": {"scale": 1.05}, "caccioppoli": {"q_grid": [0.5]}},
    )
    code, out = run(tmp_path, cfg, "suite")
    summary = json.loads((out / "suite_summary.json").read_text())
    assert [c["exit_code"] for c in summary["checks"]] == [EXIT_OK, EXIT_INAPPLICABLE, EXIT_CONFIG]
    assert code == summary["exit_code"] == EXIT_CONFIG
    assert summary["all_pass"] is False


@pytest.mark.parametrize(
    "codes, expected",
    [
        ([0, 0], EXIT_OK),
        ([3, 0], EXIT_NOT_CONVERGED),
        ([3, 4], EXIT_INAPPLICABLE),
        ([4, 5, 3], EXIT_FAILED),
        ([5, 2], EXIT_CONFIG),
    ],
)
def test_suite_exit_precedence(codes, expected):
    assert suite_exit_code(codes) == expected


def test_output_directory_precedence(tmp_path, monkeypatch):
    cfg_out = tmp_path / "from_config"
    cfg = _merge(out=str(cfg_out))
    path = _write(tmp_path, cfg)
    assert main(["solve", "--config", path]) == EXIT_OK
    assert (cfg_out / "eigenpair.json").exists()
    cli_out = tmp_path / "from_cli"
    assert main(["solve", "--config", path, "--out", str(cli_out)]) == EXIT_OK
    assert (cli_out / "eigenpair.json").exists()
    env_out = tmp_path / "from_env"
    monkeypatch.setenv("SUBFREQ_OUT", str(env_out))
    assert main(["solve", "--config", path, "--out", str(cli_out / "x")]) == EXIT_OK
    assert (env_out / "eigenpair.json").exists()
    assert not (cli_out / "x").exists()


def test_seed_override_is_recorded(tmp_path):
    code, out = run(tmp_path, BASE, "solve", "--seed", "11", "--threads", "1")
    assert code == EXIT_OK
    assert json.loads((out / "eigenpair.json").read_text())["config"]["seed"] == 11


def test_module_entry_point_is_reproducible(tmp_path):
    path = _write(tmp_path, _merge(suite=["picone", "barta"]))
    texts = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        proc = subprocess.run(
            [sys.executable, "-m", "subfreq", "suite", "--config", path, "--out", str(out)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == EXIT_OK, proc.stderr
        lines = (out / "suite_summary.json").read_text().splitlines()
        texts.append([line for line in lines if '"timestamp"' not in line])
    assert texts[0] == texts[1]
