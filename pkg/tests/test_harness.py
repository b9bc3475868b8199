import json
from pathlib import Path

import numpy as np
import pytest

from qproctomo.cli import main as cli_main
from qproctomo.harness import (
    ConfigError,
    build_channel,
    build_inputs,
    build_pom,
    channel_report,
    load_config,
    reexport,
    run_experiment,
    summarize,
)

SMALL_CONFIG = """
[experiment]
name = tiny
n_runs = 2
n_copies = 200
schemes = non_adaptive, adaptive_fixed
master_seed = 9
workers = 1

[channel]
kind = imperfect_cnot
epsilon = 0.2

[inputs]
kind = standard_product
n_qubits = 2

[pom]
kind = product_sic
n_qubits = 2

[prior]
kind = builtin
name = cnot

[solver]
lambda = 1e-3
step = 1.0
max_iters = 1500
residual_tol = 1e-4

[selection_solver]
residual_tol = 1e-3
max_iters = 500

[strategy]
max_steps = 3

[output]
dir = {out}
"""


@pytest.fixture()
def config_path(tmp_path):
    path = tmp_path / "tiny.ini"
    path.write_text(SMALL_CONFIG.format(out=tmp_path / "results"))
    return path


def test_load_config_fields(config_path):
    cfg = load_config(config_path)
    assert cfg.name == "tiny"
    assert cfg.n_runs == 2
    assert cfg.schemes == ("non_adaptive", "adaptive_fixed")
    assert cfg.n_copies == 200
    assert cfg.solver.lam == 1e-3
    assert cfg.selection_solver.residual_tol == 1e-3
    assert cfg.strategy.max_steps == 3


def test_load_config_overrides(config_path):
    cfg = load_config(config_path, {"n_runs": 5, "master_seed": 77, "n_copies": "noiseless"})
    assert cfg.n_runs == 5
    assert cfg.master_seed == 77
    assert cfg.n_copies is None


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "absent.ini")


def test_bad_scheme_rejected(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text(SMALL_CONFIG.format(out=tmp_path).replace("non_adaptive, adaptive_fixed", "bogus"))
    with pytest.raises(ConfigError):
        load_config(path)


def test_builders_reject_unknown_kinds():
    with pytest.raises(ConfigError):
        build_channel({"kind": "warp"})
    with pytest.raises(ConfigError):
        build_inputs({"kind": "warp"})
    with pytest.raises(ConfigError):
        build_pom({"kind": "warp"})


def test_run_experiment_outputs(config_path, tmp_path):
    cfg = load_config(config_path)
    result = run_experiment(cfg)
    paths = result["paths"]
    traj = Path(paths["trajectory"]).read_text().splitlines()
    assert traj[0] == "scheme,run,L,chosen_input_label,trace_distance_to_true,loglik_max,delta"
    assert len(traj) == 1 + 2 * 2 * 3  # header + schemes * runs * steps
    summary = Path(paths["summary"]).read_text().splitlines()
    assert summary[0] == "scheme,L,mean_trace_distance,stderr,mean_loglik_max,mean_delta,n_runs"
    manifest = json.loads(Path(paths["manifest"]).read_text())
    assert manifest["config"]["master_seed"] == 9
    assert "seed_derivation" in manifest


def test_determinism_across_reruns_and_workers(config_path, tmp_path):
    cfg = load_config(config_path)
    out_a = run_experiment(cfg, out_dir=tmp_path / "a")["paths"]
    out_b = run_experiment(cfg, out_dir=tmp_path / "b")["paths"]
    assert Path(out_a["trajectory"]).read_bytes() == Path(out_b["trajectory"]).read_bytes()
    assert Path(out_a["summary"]).read_bytes() == Path(out_b["summary"]).read_bytes()
    cfg2 = load_config(config_path, {"workers": 2})
    out_c = run_experiment(cfg2, out_dir=tmp_path / "c")["paths"]
    assert Path(out_a["trajectory"]).read_bytes() == Path(out_c["trajectory"]).read_bytes()


def test_summarize_matches_manual_mean():
    rows = [
        {"scheme": "s", "run": 0, "L": 1, "chosen_input_label": "a",
         "trace_distance_to_true": 0.5, "loglik_max": None, "delta": None},
        {"scheme": "s", "run": 1, "L": 1, "chosen_input_label": "b",
         "trace_distance_to_true": 0.3, "loglik_max": None, "delta": None},
    ]
    out = summarize(rows)
    assert len(out) == 1
    assert np.isclose(out[0]["mean_trace_distance"], 0.4)
    expected_se = np.std([0.5, 0.3], ddof=1) / np.sqrt(2)
    assert np.isclose(out[0]["stderr"], expected_se)
    assert out[0]["n_runs"] == 2


def test_reexport_round_trip(config_path, tmp_path):
    cfg = load_config(config_path)
    paths = run_experiment(cfg)["paths"]
    results_dir = Path(paths["summary"]).parent
    before = Path(paths["summary"]).read_bytes()
    written = reexport(results_dir, tmp_path / "re")
    after = Path(written["tiny"]).read_bytes()
    assert before == after


def test_channel_report_contents(config_path):
    cfg = load_config(config_path)
    rep = channel_report(cfg)
    assert rep["rank"] == 2
    assert rep["d_in"] == rep["d_out"] == 4
    assert rep["entropy"] > 0


# -- CLI ----------------------------------------------------------------------


def test_cli_unknown_subcommand_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        cli_main(["frobnicate"])
    assert exc.value.code == 1


def test_cli_config_error_exit_code(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[experiment]\nname = x\n\n[channel]\nkind = warp\n\n[pom]\nkind = product_sic\nn_qubits = 1\n")
    assert cli_main(["channel-info", "--config", str(bad)]) == 2


def test_cli_simulate_and_emit(config_path, tmp_path, capsys):
    code = cli_main([
        "simulate", "--config", str(config_path), "--runs", "1", "--out", str(tmp_path / "cli_out"),
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "trajectory:" in out and "summary:" in out
    code = cli_main(["emit-data", "--results", str(tmp_path / "cli_out")])
    assert code == 0


def test_cli_channel_info(config_path, capsys):
    assert cli_main(["channel-info", "--config", str(config_path)]) == 0
    blob = json.loads(capsys.readouterr().out)
    assert blob["rank"] == 2


def test_cli_validate_passes(capsys):
    assert cli_main(["validate", "--seed", "1"]) == 0
    out = capsys.readouterr().out
    assert "ALL CHECKS PASSED" in out
    assert "FAIL" not in out
