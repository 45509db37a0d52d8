"""End-to-end tests of the command-line interface."""

import json
import os

import pytest

from marcus_transport.cli import main


def run_cli(args):
    return main(args)


def read_manifest(out_dir):
    with open(os.path.join(out_dir, "manifest.json")) as fh:
        return json.load(fh)


def test_sample_levy_writes_csvs(tmp_path):
    out = str(tmp_path / "out")
    assert run_cli(["sample-levy", "--preset", "sinh", "--seed", "7",
                    "--out", out]) == 0
    manifest = read_manifest(out)
    assert manifest["summary"]["seed"] == 7
    assert os.path.exists(os.path.join(out, "increments.csv"))
    assert os.path.exists(os.path.join(out, "events.csv"))
    assert os.path.exists(os.path.join(out, "driver_path.png"))
    with open(os.path.join(out, "increments.csv")) as fh:
        assert fh.readline().strip() == "t,dW_1"
    with open(os.path.join(out, "events.csv")) as fh:
        assert fh.readline().strip() == "time,z_1"


def test_solve_writes_field_and_figure(tmp_path):
    out = str(tmp_path / "out")
    assert run_cli(["solve", "--preset", "sinh", "--seed", "42",
                    "--out", out]) == 0
    manifest = read_manifest(out)
    assert manifest["passed"] is True
    assert manifest["checks"]["oracle_rmse"] is True
    with open(os.path.join(out, "field.csv")) as fh:
        header = fh.readline().strip().split(",")
    assert header[0] == "x" and float(header[1]) == 1.0
    assert os.path.exists(os.path.join(out, "field.png"))
    assert os.path.exists(os.path.join(out, "field.flags.csv"))


def test_solve_deterministic_byte_identical(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = str(tmp_path / name)
        assert run_cli(["solve", "--preset", "deterministic", "--seed", "5",
                        "--out", out]) == 0
        with open(os.path.join(out, "field.csv"), "rb") as fh:
            outs.append(fh.read())
    assert outs[0] == outs[1]


def test_oracle_compare_pass(tmp_path, capsys):
    out = str(tmp_path / "out")
    assert run_cli(["oracle-compare", "--preset", "sinh", "--seed", "1",
                    "--out", out]) == 0
    text = capsys.readouterr().out
    assert "rmse" in text and "pass" in text


def test_oracle_compare_without_oracle_exits_2(tmp_path):
    out = str(tmp_path / "out")
    assert run_cli(["oracle-compare", "--preset", "linear-jump", "--seed", "1",
                    "--out", out]) == 2


def test_convergence_subcommand(tmp_path):
    out = str(tmp_path / "out")
    assert run_cli(["convergence", "--preset", "linear-brownian", "--seed", "2",
                    "--out", out,
                    "--dts", "0.03125,0.015625,0.0078125,0.00390625"]) == 0
    manifest = read_manifest(out)
    assert manifest["summary"]["r2"] >= 0.9
    assert os.path.exists(os.path.join(out, "convergence.png"))


def test_convergence_insufficient_ladder(tmp_path):
    out = str(tmp_path / "out")
    assert run_cli(["convergence", "--preset", "linear-brownian",
                    "--out", out, "--dts", "0.01,0.005"]) == 2


def test_flow_identity_subcommand(tmp_path):
    out = str(tmp_path / "out")
    assert run_cli(["flow-identity", "--preset", "sinh", "--seed", "42",
                    "--out", out]) == 0
    manifest = read_manifest(out)
    assert manifest["checks"]["round_trip"] is True
    assert manifest["checks"]["jump_inverse"] is True


def test_flow_identity_fails_on_tight_tolerance(tmp_path):
    out = str(tmp_path / "out")
    code = run_cli(["flow-identity", "--preset", "sinh", "--seed", "42",
                    "--out", out, "--tol", "1e-18"])
    assert code == 1
    assert read_manifest(out)["passed"] is False


def test_exp_map_subcommand(tmp_path, capsys):
    assert run_cli(["exp-map", "--preset", "sinh", "--x0", "0.0", "--z", "1.0",
                    "--substeps", "64"]) == 0
    text = capsys.readouterr().out
    assert "endpoint" in text and "estimated_error" in text


def test_config_file_run(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text(
        '[problem]\nalpha = "sqrt(x**2 + 1)"\nu0 = "1/(1+x**2)"\n'
        '[driver]\nkind = "finite_activity"\nintensity = 1.0\n'
        'mark = ["uniform", -1.0, 1.0]\nbrownian = false\nseed = 3\n'
        '[numerics]\ndt = 0.002\ntable_min = -30.0\ntable_max = 30.0\n'
        '[output]\nfigures = false\n')
    out = str(tmp_path / "out")
    assert run_cli(["solve", "--config", str(cfg), "--out", out]) == 0
    assert os.path.exists(os.path.join(out, "field.csv"))
    assert not os.path.exists(os.path.join(out, "field.png"))


def test_config_and_preset_are_mutually_exclusive(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text('[problem]\npreset = "sinh"\n')
    assert run_cli(["solve", "--config", str(cfg), "--preset", "sinh",
                    "--out", str(tmp_path / "o")]) == 2


def test_missing_problem_source_exits_2(tmp_path):
    assert run_cli(["solve", "--out", str(tmp_path / "o")]) == 2


def test_invalid_config_key_exits_2(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text('[problem]\npreset = "sinh"\n[numerics]\nbogus = 1\n')
    assert run_cli(["solve", "--config", str(cfg),
                    "--out", str(tmp_path / "o")]) == 2


def test_bad_threads_exits_2(tmp_path):
    assert run_cli(["solve", "--preset", "sinh", "--threads", "0",
                    "--out", str(tmp_path / "o")]) == 2


def test_hex_seed_accepted(tmp_path):
    out = str(tmp_path / "out")
    assert run_cli(["sample-levy", "--preset", "sinh", "--seed", "0x10",
                    "--out", out]) == 0
    assert read_manifest(out)["summary"]["seed"] == 16
