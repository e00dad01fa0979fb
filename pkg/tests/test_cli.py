import json

import pytest

from padic_kinetics.cli import main
from padic_kinetics.config import protein_default
from padic_kinetics.scenarios import OUTPUT_ENV


def _small_mc(tmp_path):
    path = tmp_path / "mc.json"
    cfg = protein_default().with_updates(**{"oracle.mc_checkpoints": 5, "oracle.mc_horizon_s": 20.0})
    path.write_text(cfg.to_json())
    return path


def test_init_config_roundtrip(tmp_path, capsys):
    assert main(["init-config", "protein"]) == 0
    text = capsys.readouterr().out
    (tmp_path / "p.json").write_text(text)
    assert main(["init-config", "glass"]) == 0
    assert "quench_targets_K" in capsys.readouterr().out


def test_protein_run_writes_bundle(tmp_path, capsys):
    out = tmp_path / "protein"
    assert main(["protein", "--out", str(out)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert any(line.startswith("PASS") and "S_anchor_near_one_third" in line for line in lines)
    assert not any(line.startswith("FAIL") for line in lines)
    for name in ("config.json", "summary.json", "rates.csv", "control.csv", "relaxation.csv"):
        assert (out / name).exists()
    header = (out / "relaxation.csv").read_text().splitlines()[0]
    assert header == "t [s],T [K],p1_closed [1],p1_trotter [1],p2 [1],S [1]"
    assert "version" in json.loads((out / "config.json").read_text())


def test_mc_rerun_is_byte_identical(tmp_path):
    cfg = _small_mc(tmp_path)
    runs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        main(["mc", "--config", str(cfg), "--paths", "2000", "--seed", "11", "--out", str(out)])
        runs.append(out)
    for name in ("monte_carlo.csv", "leaf_counts.csv", "summary.json", "config.json"):
        assert (runs[0] / name).read_bytes() == (runs[1] / name).read_bytes()
    resolved = json.loads((runs[0] / "config.json").read_text())["config"]
    assert resolved["oracle"]["seed"] == 11 and resolved["oracle"]["paths"] == 2000
    other = tmp_path / "other"
    main(["mc", "--config", str(cfg), "--paths", "2000", "--seed", "12", "--out", str(other)])
    assert (other / "leaf_counts.csv").read_bytes() != (runs[0] / "leaf_counts.csv").read_bytes()


def test_output_env_default(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
    assert main(["mc", "--config", str(_small_mc(tmp_path)), "--paths", "500"]) in (0, 3)
    assert (tmp_path / "env" / "mc" / "summary.json").exists()


def test_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    data = json.loads(protein_default().to_json())
    data["model"]["p"] = 6
    bad.write_text(json.dumps(data))
    assert main(["protein", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2
    assert "model" in capsys.readouterr().err
    assert main(["custom", "--out", str(tmp_path / "y")]) == 2
    assert main(["glass", "--config", str(_small_mc(tmp_path)), "--out", str(tmp_path / "z")]) == 2
    assert main(["mc", "--paths", "0", "--out", str(tmp_path / "w")]) == 2


def test_unreadable_config_exit_4(tmp_path):
    assert main(["protein", "--config", str(tmp_path / "missing.json")]) == 4


def test_unwritable_output_exit_4(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["protein", "--out", str(blocker / "sub")]) == 4


def test_shifted_convention_oracle_exit_3(tmp_path, capsys):
    path = tmp_path / "shifted.json"
    path.write_text(protein_default().with_updates(**{"oracle.convention": "paper"}).to_json())
    code = main(["oracle-compare", "--config", str(path), "--skip-mc", "--out", str(tmp_path / "o")])
    assert code == 3
    assert "FAIL  eigenvalues_matched" in capsys.readouterr().out


def test_usage_error_from_argparse():
    with pytest.raises(SystemExit) as info:
        main(["nonsense"])
    assert info.value.code == 2
