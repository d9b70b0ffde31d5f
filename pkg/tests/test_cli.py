import json

import pytest

from hybrid_barrier.cli import main


def test_vanilla_command(tmp_path, capsys):
    rc = main(["vanilla", "--strikes", "0.9,1.0", "--paths", "500", "--out", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "results.csv").exists()
    assert "WillardMC" in capsys.readouterr().out


def test_barrier_command(tmp_path):
    rc = main([
        "barrier", "--payoff", "DownOutCall", "--barrier", "0.9", "--strikes", "0.8,1.0", "--paths", "20",
        "--method", "HybridMHP,HybridFDM,MCS2D", "--out", str(tmp_path),
    ])
    assert rc == 0
    assert json.loads((tmp_path / "manifest.json").read_text())["config"]["n_paths"]["MCS2D"] == 200


def test_green_and_minpdf_commands(tmp_path):
    assert main(["green", "--paths", "5", "--method", "HybridFDM", "--out", str(tmp_path / "g")]) == 0
    assert (tmp_path / "g" / "green.csv").exists()
    assert main(["minpdf", "--lam", "0.2", "--a", "-0.5", "--b", "0.0,0.5", "--out", str(tmp_path / "m")]) == 0


def test_repro_preset(tmp_path):
    assert main(["repro", "fig5", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "fig5_volterra.csv").exists()
    assert (tmp_path / "manifest.json").exists()


def test_config_file_with_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({
        "contract": {"type": "barrier", "maturity": 1.0, "barrier": 0.6, "payoff_kind": "NoTouch"},
        "methods": ["HybridFDM"], "n_paths": {"HybridFDM": 4},
    }))
    assert main(["barrier", "--config", str(cfg), "--seed", "3", "--out", str(tmp_path / "o")]) == 0
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["seed"] == 3 and man["config"]["contract"]["barrier"] == 0.6


@pytest.mark.parametrize(
    "argv, code",
    [
        (["barrier", "--barrier", "1.2", "--paths", "4"], 2),
        (["vanilla", "--method", "HybridMHP"], 2),
        (["minpdf", "--lam", "0.1", "--a", "0.5"], 2),
        (["vanilla", "--paths", "10", "--method", "WillardMC"], 2),
    ],
)
def test_bad_inputs_exit_2(tmp_path, argv, code):
    assert main(argv + ["--out", str(tmp_path)]) == code


def test_unknown_method_is_a_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["barrier", "--method", "Nope", "--out", str(tmp_path)])
    assert exc.value.code == 2
