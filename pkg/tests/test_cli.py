import json
from pathlib import Path

import pytest
import yaml

from polarmem.cli import main
from polarmem.config import ConfigError, load_config, parse_config

GE_NOISE = {
    "type": "gilbert_elliott",
    "transition": [[0.9, 0.1], [0.1, 0.9]],
    "error_probs": [0.02, 0.25],
}


def write_cfg(tmp_path, name, body):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(body))
    return str(p)


def polarize_cfg(tmp_path, **over):
    body = {"experiment": "polarize", "noise": GE_NOISE,
            "lengths": [4, 8], "samples": 300, "seed": 1,
            "output_dir": str(tmp_path / "out")}
    body.update(over)
    return write_cfg(tmp_path, "cfg.yaml", body)


# ---------------------------------------------------------------------------
# config schema
# ---------------------------------------------------------------------------

def test_unknown_top_level_key_rejected():
    with pytest.raises(ConfigError, match="unknown keys"):
        parse_config({"experiment": "metrics", "noise": GE_NOISE,
                      "output_dir": "x", "surprise": 1})


def test_unknown_noise_key_rejected():
    bad = dict(GE_NOISE, rho=0.5)
    with pytest.raises(ConfigError, match="unknown keys"):
        parse_config({"experiment": "metrics", "noise": bad,
                      "output_dir": "x"})


def test_missing_required_keys():
    with pytest.raises(ConfigError, match="missing required"):
        parse_config({"experiment": "metrics"})


def test_bad_experiment_kind():
    with pytest.raises(ConfigError, match="unknown experiment kind"):
        parse_config({"experiment": "mystery", "noise": GE_NOISE,
                      "output_dir": "x"})


def test_physics_parameters_must_be_explicit():
    with pytest.raises(ConfigError):
        parse_config({"experiment": "metrics",
                      "noise": {"type": "gaussian"}, "output_dir": "x"})
    with pytest.raises(ConfigError):
        parse_config({"experiment": "metrics",
                      "noise": {"type": "student", "nu": 2.0},
                      "output_dir": "x"})


def test_length_and_sample_validation():
    with pytest.raises(ConfigError, match="powers of 2"):
        parse_config({"experiment": "polarize", "noise": GE_NOISE,
                      "output_dir": "x", "lengths": [3]})
    with pytest.raises(ConfigError, match="samples"):
        parse_config({"experiment": "polarize", "noise": GE_NOISE,
                      "output_dir": "x", "lengths": [4], "samples": 10})


def test_load_config_roundtrip(tmp_path):
    path = polarize_cfg(tmp_path)
    cfg = load_config(path)
    assert cfg.kind == "polarize"
    assert cfg.lengths == (4, 8)
    assert cfg.samples == 300


# ---------------------------------------------------------------------------
# CLI behaviour and exit codes
# ---------------------------------------------------------------------------

def test_run_polarize_and_verify(tmp_path, capsys):
    path = polarize_cfg(tmp_path)
    assert main(["run", path]) == 0
    out = tmp_path / "out"
    assert (out / "polar_L4.csv").exists()
    assert (out / "polar_L8.csv").exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["passed"] is True
    assert "timestamp" in summary
    capsys.readouterr()
    assert main(["verify", str(out)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert all(ln.startswith("PASS") for ln in lines)


def test_rerun_is_byte_identical(tmp_path):
    path = polarize_cfg(tmp_path)
    assert main(["run", path]) == 0
    first = (tmp_path / "out" / "polar_L8.csv").read_bytes()
    assert main(["run", path]) == 0
    assert (tmp_path / "out" / "polar_L8.csv").read_bytes() == first


def test_schema_violation_exits_2(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("experiment: polarize\nnoise: {type: gilbert_elliott}\n"
                 "output_dir: x\nwat: 1\n")
    assert main(["run", str(p)]) == 2


def test_missing_config_exits_4(tmp_path):
    assert main(["run", str(tmp_path / "nope.yaml")]) == 4


def test_semantic_config_error_exits_2(tmp_path):
    # polarize without lengths is a config-level failure
    path = polarize_cfg(tmp_path, lengths=[])
    assert main(["run", path]) == 2


def test_verify_missing_dir_exits_4(tmp_path):
    assert main(["verify", str(tmp_path / "ghost")]) == 4


def test_verify_empty_dir_fails(tmp_path):
    d = tmp_path / "empty"
    d.mkdir()
    assert main(["verify", str(d)]) == 1


def test_verify_flags_tampered_artifact(tmp_path):
    path = polarize_cfg(tmp_path)
    assert main(["run", path]) == 0
    p = tmp_path / "out" / "polar_L4.csv"
    lines = p.read_text().splitlines()
    cells = lines[1].split(",")
    cells[2], cells[4] = "0.99", "0.99"      # I^2 + Z^2 > 1: impossible pair
    lines[1] = ",".join(cells)
    p.write_text("\n".join(lines) + "\n")
    assert main(["verify", str(tmp_path / "out")]) == 1


def test_list_experiments(capsys):
    assert main(["list-experiments"]) == 0
    out = capsys.readouterr().out
    for kind in ("metrics", "polarize", "theorem4", "rate", "ber",
                 "fig3", "fig4"):
        assert kind in out


def test_run_metrics_writes_csv(tmp_path):
    path = write_cfg(tmp_path, "m.yaml",
                     {"experiment": "metrics", "noise": GE_NOISE,
                      "output_dir": str(tmp_path / "mout")})
    assert main(["run", path]) == 0
    text = (tmp_path / "mout" / "metrics.csv").read_text()
    assert text.splitlines()[0] == "name,value,uncertainty,method,converged"
    assert "i_dagger" in text


def test_run_theorem4_small(tmp_path):
    path = write_cfg(tmp_path, "t.yaml",
                     {"experiment": "theorem4", "noise": GE_NOISE,
                      "lengths": [2], "output_dir": str(tmp_path / "tout")})
    assert main(["run", path]) == 0
    text = (tmp_path / "tout" / "theorem4.csv").read_text()
    assert "violated" not in text


def test_plots_rendered_when_requested(tmp_path):
    path = polarize_cfg(tmp_path, plots=True)
    assert main(["run", path]) == 0
    assert (tmp_path / "out" / "polarization_hist.svg").exists()
