import json
import math

import pytest

from topoclock.cli import ConfigError, main, parse_config


def _data_files(path):
    man = json.loads((path / "manifest.json").read_text())
    return man, {name: (path / name).read_bytes() for name in man["files"]}


def test_winding_outputs_and_manifest(tmp_path):
    assert main(["winding", "--out", str(tmp_path)]) == 0
    man, files = _data_files(tmp_path)
    assert man["status"] == 0 and man["tool"] == "topoclock"
    assert man["config"]["params"]["winding.omega_b_rad_s"] == pytest.approx(2 * math.pi * 10)
    assert files


def test_clock_rerun_is_byte_identical(tmp_path):
    args = ["clock", "--seed", "3", "--realizations", "6"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    _, a = _data_files(tmp_path / "a")
    _, b = _data_files(tmp_path / "b")
    assert a == b


def test_seed_changes_clock_output(tmp_path):
    base = ["clock", "--realizations", "6"]
    main(base + ["--seed", "1", "--out", str(tmp_path / "a")])
    main(base + ["--seed", "2", "--out", str(tmp_path / "b")])
    assert _data_files(tmp_path / "a")[1] != _data_files(tmp_path / "b")[1]


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 4, "md-scan.site_count": 128, "winding.k_points": 512}))
    rc = parse_config("md-scan", str(cfg), {"seed": 9}, ["md-scan.r=[3.0]"])
    assert rc.seed == 9 and rc.params["site_count"] == 128 and rc.params["r"] == [3.0]


@pytest.mark.parametrize("content, fragment", [
    ({"md-scan.site_cout": 3}, "md-scan.site_cout: unknown key"),
    ({"md-scan.omega_b_hz": -1}, "md-scan.omega_b_hz"),
    ({"md-scan.r": [1, "x"]}, "md-scan.r[1]: expected a number"),
    ({"clock.sigma_a": "big"}, "clock.sigma_a: expected a number"),
    ({"seed": -1}, "seed"),
    ({"nope.key": 1}, "unknown experiment"),
])
def test_config_errors_name_the_key(tmp_path, content, fragment):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(content))
    kind = "clock" if "clock" in json.dumps(content) else "md-scan"
    with pytest.raises(ConfigError, match=fragment.replace("[", r"\[")):
        parse_config(kind, str(cfg))


def test_bad_config_exits_nonzero(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text("{not json")
    assert main(["winding", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "invalid JSON" in capsys.readouterr().err


def test_workers_from_environment(monkeypatch):
    monkeypatch.setenv("TOPOCLOCK_WORKERS", "3")
    assert parse_config("clock").workers == 3
    assert parse_config("clock", overrides={"workers": 1}).workers == 1


def test_ix_scan_runs(tmp_path):
    assert main(["ix-scan", "--out", str(tmp_path), "--set", "ix-scan.r=[3.0]"]) == 0
    man, files = _data_files(tmp_path)
    assert any(name.endswith(".csv") for name in files)
