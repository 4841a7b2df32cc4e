"""Config validation and the command-line surface."""

import json
import shutil
import subprocess
import sys
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from gspt.cli import _fmt, main, write_csv
from gspt.config import load_config
from gspt.errors import ConfigError


def _cfg(tmp_path, body, name="run.json"):
    p = tmp_path / name
    p.write_text(json.dumps(body, indent=1))
    return str(p)


MINIMAL_ANALYZE = {"model": {"name": "minimal"}, "out": "unused"}


# ------------------------------------------------------------------ config

def test_load_config_happy_path(tmp_path):
    path = _cfg(tmp_path, {"model": {"name": "ebers_moll",
                                     "params": {"mu": 1.0, "kappa": 1e-2,
                                                "a": 4.0, "b": 6.0}},
                           "window": [-12, 2, -3, 3],
                           "eps": 1e-3})
    cfg = load_config(path, "analyze")
    assert cfg.model_name == "ebers_moll"
    assert cfg.window == (-12.0, 2.0, -3.0, 3.0)
    assert cfg.eps == 1e-3
    assert cfg.build_model().name == "ebers_moll"


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="No such|cannot open|not found"):
        load_config(str(tmp_path / "absent.json"), "analyze")


def test_load_config_bad_json_reports_position(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text('{"model": {"name": "minimal",}}')
    with pytest.raises(ConfigError, match=r"invalid JSON at line 1"):
        load_config(str(p), "analyze")


def test_load_config_unknown_keys_with_line(tmp_path):
    path = _cfg(tmp_path, {"model": {"name": "minimal"}, "bogus": 1})
    with pytest.raises(ConfigError, match=r"bogus \(line \d+\)"):
        load_config(path, "analyze")
    path = _cfg(tmp_path, {"model": {"name": "minimal"},
                           "tolerances": {"integrate": 1e-11, "typo": 1}})
    with pytest.raises(ConfigError, match=r"tolerances\.typo \(line \d+\)"):
        load_config(path, "analyze")


def test_load_config_command_scoping(tmp_path):
    # riccati block is not an analyze key
    path = _cfg(tmp_path, {"model": {"name": "minimal"},
                           "riccati": {"a0": 1.0}})
    with pytest.raises(ConfigError, match="riccati"):
        load_config(path, "analyze")
    # analyze does not need eps; simulate does
    path = _cfg(tmp_path, {"model": {"name": "minimal"}})
    assert load_config(path, "analyze").eps is None
    with pytest.raises(ConfigError, match="eps"):
        load_config(path, "simulate")


def test_load_config_eps_ladder(tmp_path):
    path = _cfg(tmp_path, {"model": {"name": "minimal"},
                           "eps": {"min": 1e-4, "max": 1e-2, "count": 6,
                                   "log": True}})
    cfg = load_config(path, "scale")
    assert len(cfg.eps_values) == 6
    assert np.allclose(cfg.eps_values, np.logspace(-4, -2, 6))
    for bad in ({"min": 1e-2, "max": 1e-4, "count": 6},
                {"min": 1e-4, "max": 1e-2, "count": 1},
                {"min": 1e-4, "max": 1e-2}):
        path = _cfg(tmp_path, {"model": {"name": "minimal"}, "eps": bad})
        with pytest.raises(ConfigError, match="eps"):
            load_config(path, "scale")


def test_load_config_bad_model_params(tmp_path):
    path = _cfg(tmp_path, {"model": {"name": "stickslip_poly",
                                     "params": {"v0": 2.0, "v_m": 1.0,
                                                "mu_m": 0.5, "mu_s": 1.0}}})
    with pytest.raises(ConfigError, match="model"):
        load_config(path, "analyze")       # needs v0 < v_m
    path = _cfg(tmp_path, {"model": {"name": "no_such_model"}})
    with pytest.raises(ConfigError, match="no_such_model"):
        load_config(path, "analyze")


def test_load_config_window_shape(tmp_path):
    path = _cfg(tmp_path, {"model": {"name": "minimal"},
                           "window": [-1, 1, -1]})
    with pytest.raises(ConfigError, match="window"):
        load_config(path, "analyze")


# -------------------------------------------------------------- csv format

def test_fmt_floats_roundtrip(rng):
    for x in rng.uniform(-1e6, 1e6, size=50):
        assert float(_fmt(float(x))) == float(x)
    assert float(_fmt(1e-17)) == 1e-17
    assert _fmt(True) == "true" and _fmt(False) == "false"
    assert _fmt(None) == ""
    assert _fmt("a,b") == '"a,b"'
    assert _fmt('say "hi"') == '"say ""hi"""'
    assert _fmt(7) == "7"


def test_write_csv_crlf(tmp_path):
    p = tmp_path / "t.csv"
    write_csv(str(p), ["a", "b"], [(1.5, "x")])
    raw = p.read_bytes()
    assert raw == b"a,b\r\n1.5,x\r\n"


# --------------------------------------------------------------- cli paths

def test_cli_list_models(capsys):
    assert main(["list-models"]) == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if l.strip()]
    names = {l.split()[0] for l in lines}
    assert {"minimal", "vdp", "ebers_moll", "stickslip_exp",
            "stickslip_poly", "transition"} <= names


def test_cli_requires_config(capsys):
    assert main(["analyze"]) == 2
    assert "requires --config" in capsys.readouterr().err


def test_cli_analyze_minimal(tmp_path, capsys):
    out = tmp_path / "out"
    cfgp = _cfg(tmp_path, MINIMAL_ANALYZE)
    assert main(["analyze", "--config", cfgp, "--out", str(out),
                 "--quiet"]) == 0
    for f in ("critical_curve.csv", "contact_points.csv",
              "n_singularities.csv", "phase_portrait.svg"):
        assert (out / f).exists()
    rows = (out / "contact_points.csv").read_bytes().decode().strip().split("\r\n")
    assert rows[0] == "x,y,order,regular,jump"
    assert len(rows) == 2
    x, y, order, regular, jump = rows[1].split(",")
    assert float(x) == 1.0 and float(y) == 0.0
    assert order == "1" and regular == "true" and jump == "off"
    sings = (out / "n_singularities.csv").read_bytes().decode().strip().split("\r\n")
    assert len(sings) == 2 and sings[1].endswith("unstable_focus")


def test_cli_analyze_svg_is_valid_xml(tmp_path):
    out = tmp_path / "out"
    cfgp = _cfg(tmp_path, MINIMAL_ANALYZE)
    main(["analyze", "--config", cfgp, "--out", str(out), "--quiet"])
    svg = (out / "phase_portrait.svg").read_text()
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg")
    assert "#1a9850" in svg          # critical curve in green
    assert "#d73027" in svg          # N-singularity in red


def test_cli_outputs_are_deterministic(tmp_path):
    cfgp = _cfg(tmp_path, MINIMAL_ANALYZE)
    a, b = tmp_path / "a", tmp_path / "b"
    main(["analyze", "--config", cfgp, "--out", str(a), "--quiet"])
    main(["analyze", "--config", cfgp, "--out", str(b), "--quiet"])
    for f in ("critical_curve.csv", "contact_points.csv",
              "n_singularities.csv", "phase_portrait.svg"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_cli_config_error_exit_2(tmp_path, capsys):
    cfgp = _cfg(tmp_path, {"model": {"name": "minimal"}, "bogus": 1})
    assert main(["analyze", "--config", cfgp, "--quiet"]) == 2
    err = capsys.readouterr().err
    assert err.startswith("config error:") and "bogus" in err
    assert "line" in err


def test_cli_eps_override_validation(tmp_path, capsys):
    cfgp = _cfg(tmp_path, {"model": {"name": "minimal"}, "eps": 1e-2})
    out = str(tmp_path / "o")
    assert main(["simulate", "--config", cfgp, "--out", out,
                 "--eps", "-1.0", "--quiet"]) == 2
    assert "--eps must be positive" in capsys.readouterr().err


def test_cli_computation_error_exit_3(tmp_path, capsys):
    # vdp has two fold points: no single-jump singular cycle exists
    cfgp = _cfg(tmp_path, {"model": {"name": "vdp"}})
    out = str(tmp_path / "o")
    assert main(["cycle", "--config", cfgp, "--out", out, "--quiet"]) == 3
    err = capsys.readouterr().err
    assert "ComputationError" in err
    assert "no two-stroke singular cycle" in err


def test_cli_riccati_defaults(tmp_path, capsys):
    cfgp = _cfg(tmp_path, {"riccati": {}})
    out = tmp_path / "o"
    assert main(["riccati", "--config", cfgp, "--out", str(out),
                 "--quiet"]) == 0
    summary = (out / "riccati_summary.csv").read_bytes().decode().strip().split("\r\n")
    assert summary[0] == "key,value"
    vals = dict(line.split(",", 1) for line in summary[1:])
    assert abs(float(vals["omega0"]) - 2.3381074104597670) < 1e-12
    assert float(vals["left_tail_decay"]) >= 3.5
    assert (abs(float(vals["right_tail_constant"])
                - float(vals["right_tail_target"])) < 1e-4)
    assert (out / "riccati.csv").exists() and (out / "riccati.svg").exists()


@pytest.mark.skipif(shutil.which("gspt") is None,
                    reason="console script not on PATH")
def test_console_script_runs():
    res = subprocess.run(["gspt", "list-models"], capture_output=True,
                         text=True, timeout=120)
    assert res.returncode == 0
    assert "minimal" in res.stdout
