"""
Tests for the command-line entry point.
"""
import json
import math

import pytest

from tracing_topk.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, main
from tracing_topk.core.dataset import generate_uniform, parse_dataset_text


def _write_config(path, **overrides):
    data = {"kind": "soundness", "n": 8, "d": 120, "k": 6, "rho": 0.2, "trials": 6, "master_seed": 11}
    data.update(overrides)
    path.write_text(json.dumps(data))
    return path


def test_gen_prints_text_format(capsys):
    assert main(["gen", "--n", "2", "--d", "3", "--seed", "7"]) == EXIT_OK
    assert parse_dataset_text(capsys.readouterr().out) == generate_uniform(2, 3, 7)


def test_gen_writes_file(tmp_path):
    out = tmp_path / "x.txt"
    assert main(["gen", "--n", "3", "--d", "4", "--seed", "1", "--out", str(out)]) == EXIT_OK
    assert out.read_text().startswith("3 4\n")


def test_topk_reads_dataset_file(tmp_path, capsys):
    path = tmp_path / "x.txt"
    path.write_text("2 3\n+1 +1 -1\n+1 +1 +1\n")
    assert main(["topk", "--input", str(path), "--k", "1"]) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["selected"] == [0]
    assert payload["q_k"] == {"num": 1, "den": 1}


def test_release_noiseless_matches_exact(capsys):
    assert main(["release", "--n", "20", "--d", "30", "--k", "4", "--mech", "expmech", "--epsilon", "noiseless"]) == EXIT_OK
    noisy = json.loads(capsys.readouterr().out)
    assert main(["topk", "--n", "20", "--d", "30", "--k", "4"]) == EXIT_OK
    exact = json.loads(capsys.readouterr().out)
    assert noisy["selected"] == exact["selected"]
    assert noisy["release_error"] == 0.0


def test_release_adversarial_reports_accuracy(capsys):
    argv = ["release", "--n", "12", "--d", "50", "--k", "3", "--mech", "adversarial", "--alpha", "0.25", "--target-row", "0"]
    assert main(argv) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["alpha_accurate"] is True


def test_attack_outputs_decisions(capsys):
    assert main(["attack", "--n", "6", "--d", "200", "--k", "10", "--rho", "0.1"]) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert len(payload["decisions"]) == 6
    assert payload["traced_count"] == payload["decisions"].count("IN")
    assert payload["out_sample_decision"] in ("IN", "OUT")


def test_experiment_writes_csv_and_summary(tmp_path, capsys):
    config = _write_config(tmp_path / "config.json")
    out = tmp_path / "results.csv"
    assert main(["experiment", "--config", str(config), "--out", str(out)]) == EXIT_OK
    assert len(out.read_text().splitlines()) == 7
    assert (tmp_path / "results.summary.json").exists()
    assert json.loads(capsys.readouterr().out)["trials"] == 6


def test_experiment_is_reproducible_across_workers(tmp_path):
    config = _write_config(tmp_path / "config.json", kind="completeness", trials=10)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["experiment", "--config", str(config), "--out", str(a), "--workers", "1"]) == EXIT_OK
    assert main(["experiment", "--config", str(config), "--out", str(b), "--workers", "3"]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_experiment_config_error_exit_code(tmp_path, capsys):
    config = _write_config(tmp_path / "config.json", trials=0)
    assert main(["experiment", "--config", str(config), "--out", str(tmp_path / "r.csv")]) == EXIT_CONFIG
    assert "error:" in capsys.readouterr().err


def test_experiment_missing_config_is_io_error(tmp_path):
    assert main(["experiment", "--config", str(tmp_path / "absent.json")]) == EXIT_IO


def test_experiment_unwritable_output_is_io_error(tmp_path):
    config = _write_config(tmp_path / "config.json")
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    assert main(["experiment", "--config", str(config), "--out", str(blocker / "r.csv")]) == EXIT_IO


@pytest.mark.parametrize(
    "argv",
    [
        ["experiment"],
        ["bounds", "--kind", "hoeffding"],
        ["release", "--n", "4", "--d", "6", "--k", "2", "--mech", "expmech", "--epsilon", "abc"],
        ["topk", "--n", "4", "--d", "six", "--k", "2"],
        ["no-such-command"],
    ],
)
def test_usage_errors_exit_with_config_code(argv, capsys):
    assert main(argv) == EXIT_CONFIG
    assert "error:" in capsys.readouterr().err


def test_help_exits_cleanly(capsys):
    assert main(["--help"]) == EXIT_OK
    assert "usage:" in capsys.readouterr().out


def test_regime_exact_and_noisy(capsys):
    assert main(["regime", "--n", "24", "--d", "65536", "--k", "100", "--rho", "0.05"]) == EXIT_OK
    exact = json.loads(capsys.readouterr().out)
    assert exact["satisfied"] is True
    assert exact["gamma"] == pytest.approx(0.4912, abs=1e-4)

    assert main(["regime", "--n", "24", "--d", "65536", "--k", "100", "--rho", "0.05", "--noisy"]) == EXIT_OK
    noisy = json.loads(capsys.readouterr().out)
    assert noisy["C5"] > 0


def test_regime_outside_domain_exit_code():
    assert main(["regime", "--n", "1", "--d", "20", "--k", "10", "--rho", "0.5"]) == EXIT_CONFIG


def test_witness(capsys):
    assert main(["witness", "--rho-sound", "0.25", "--untraced", "0.25", "--delta", "0"]) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["epsilon_max"] == pytest.approx(math.log(2))
    assert payload["defined"] is True

    assert main(["witness", "--rho-sound", "0", "--untraced", "0", "--delta", "0.5"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["epsilon_max"] == "Infinity"


def test_bounds(capsys):
    assert main(["bounds", "--kind", "hoeffding", "--nu", "0.5", "--n", "24"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["tail"] == pytest.approx(math.exp(-3))

    assert main(["bounds", "--kind", "anticonc", "--nu", "1", "--n", "1", "--beta", "1"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["validity"] == "unverified"

    assert main(["bounds", "--kind", "chernoff", "--nu", "0.5"]) == EXIT_CONFIG
