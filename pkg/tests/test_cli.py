import csv
import json

import numpy as np
import pytest

from hodovort.cli import (EXIT_CHECK, EXIT_CONFIG, EXIT_EMPTY, EXIT_NO_BLOWUP, EXIT_OK, ConfigError,
                          RunConfig, main)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_defaults_config_and_flags_precedence():
    cfg = RunConfig.build("surface", {"map": "cubic"}, {"grid": "10x10", "tol_disc": 1e-6})
    assert cfg.options["grid"] == "10x10" and cfg.options["tol_disc"] == 1e-6
    cfg = RunConfig.build("surface", {"map": "cubic", "grid": "20x20"}, {"grid": "10x10"})
    assert cfg.options["grid"] == "20x20"
    assert cfg.workers >= 1 and cfg.seed == 0 and not cfg.check


@pytest.mark.parametrize("explicit, document", [
    ({"map": "cubic", "gird": "1x1"}, None),
    ({"map": "cubic"}, {"tol_disc": "small"}),
    ({"map": "cubic", "workers": 0}, None),
    ({}, None),
    ({"map": "cubic"}, {"command": "field"}),
])
def test_invalid_configurations(explicit, document):
    with pytest.raises(ConfigError):
        RunConfig.build("surface", explicit, document)


def test_choice_validation():
    with pytest.raises(ConfigError):
        RunConfig.build("exponent", {"map": "cubic", "mode": "radial"})


def test_config_errors_exit_two(tmp_path, capsys):
    assert main(["surface", "--map", "nosuchmap", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["surface", "--map", "cubic", "--grid", "ax3", "--out", str(tmp_path)]) == EXIT_CONFIG
    bad = tmp_path / "c.json"
    bad.write_text(json.dumps({"map": "cubic", "gird": "3x3"}))
    assert main(["surface", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_CONFIG
    bad.write_text("[1, 2]")
    assert main(["surface", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["exponent", "--map", "cubic", "--mode", "radial"]) == EXIT_CONFIG


def test_config_file_supplies_options(tmp_path):
    doc = tmp_path / "run.json"
    doc.write_text(json.dumps({"map": "linear", "out": str(tmp_path / "o"), "grid": "5x5"}))
    assert main(["surface", "--config", str(doc)]) == EXIT_OK
    rows = _rows(tmp_path / "o" / "surface.csv")
    assert rows[0] == ["u1", "u2", "t", "multiplicity"]
    assert len(rows) == 26 and all(float(r[2]) == pytest.approx(-1.0) for r in rows[1:])


def test_surface_cubic_checks(tmp_path, capsys):
    code = main(["surface", "--map", "cubic", "--grid", "60x60", "--check", "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == EXIT_OK and "FAIL" not in out and "PASS" in out
    assert (tmp_path / "domain.csv").exists()


def test_harmonic_surface_is_empty(tmp_path):
    assert main(["surface", "--map", "harmonic:W=exp", "--grid", "20x20",
                 "--out", str(tmp_path)]) == EXIT_EMPTY


def test_catastrophe_exit_codes(tmp_path, capsys):
    assert main(["catastrophe", "--map", "rotational", "--out", str(tmp_path)]) == EXIT_NO_BLOWUP
    assert main(["catastrophe", "--map", "cubic", "--grid", "100", "--check",
                 "--out", str(tmp_path)]) == EXIT_OK
    doc = json.loads((tmp_path / "catastrophe.json").read_text())
    assert doc["t_c"] == pytest.approx(1.62019, abs=1e-3)
    assert "FAIL" not in capsys.readouterr().out


def test_vorticity_rotational(tmp_path):
    assert main(["vorticity", "--map", "rotational", "--u", "0.3,-0.2", "--times", "0:5:11",
                 "--check", "--out", str(tmp_path)]) == EXIT_OK
    rows = _rows(tmp_path / "vorticity.csv")
    t, w = np.array([[float(r[0]), float(r[1])] for r in rows[1:]]).T
    assert np.allclose(w, 2.0 / (1.0 + t * t), atol=1e-12)


def test_exponent_temporal_locus(tmp_path):
    assert main(["exponent", "--map", "cubic", "--scan", "locus", "--count", "3", "--workers", "1",
                 "--check", "--out", str(tmp_path)]) == EXIT_OK
    rows = _rows(tmp_path / "exponents.csv")
    assert rows[0][:5] == ["u1", "u2", "t_b", "level", "slope"]
    assert all(float(r[4]) == pytest.approx(-2.0, abs=0.05) for r in rows[1:])


def test_field_outputs(tmp_path):
    assert main(["field", "--map", "rotational", "--grid=-1:1:5,-1:1:5", "--t", "2", "--fd-curl",
                 "--binary", "--workers", "1", "--check", "--out", str(tmp_path)]) == EXIT_OK
    rows = _rows(tmp_path / "field.csv")
    assert "omega_fd" in rows[0] and len(rows) == 26
    assert (tmp_path / "field.bin").exists()


def test_failed_check_exits_five(tmp_path, capsys):
    # the default coarse grid misses the steep region near the catastrophe point
    code = main(["field", "--map", "gaussian", "--t", "0.999tc", "--workers", "1", "--check",
                 "--out", str(tmp_path)])
    assert code == EXIT_CHECK
    assert "FAIL" in capsys.readouterr().out


def test_frame_json_written(tmp_path):
    assert main(["frame", "--map", "cubic", "--check", "--out", str(tmp_path)]) == EXIT_OK
    doc = json.loads((tmp_path / "frame.json").read_text())
    assert doc["rank"] == 1 and doc["completeness_defect"] <= 1e-12
