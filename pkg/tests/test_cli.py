import csv
import subprocess
import sys

import numpy as np
import pytest
import yaml

from bbcloop.analysis import frequency_response, pole_zero_report, step_response
from bbcloop.cli import emit
from bbcloop.cli.config import ConfigError, dump_config, config_from_dict, load_config, provenance_for
from bbcloop.cli.main import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, EXIT_TOLERANCE, main
from bbcloop.lti import tf
from bbcloop.systems import closed_loop


def _config(tmp_path, data):
    path = tmp_path / "scenario.yaml"
    path.write_text(yaml.safe_dump(data) if not isinstance(data, str) else data)
    return str(path)


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_model_prints_boost_plant(capsys):
    assert main(["model", "--mode", "boost", "--domain", "analog", "--controller", "none"]) == EXIT_OK
    assert "(2e+06) / (s^2 + 400 s + 1e+06)" in capsys.readouterr().out


def test_step_buck_pid_overshoot(capsys):
    assert main(["step", "--mode", "buck", "--controller", "pid", "--domain", "analog"]) == EXIT_OK
    out = capsys.readouterr().out
    line = next(x for x in out.splitlines() if "overshoot" in x)
    assert float(line.split()[-1]) == pytest.approx(5.74, abs=0.01)


@pytest.mark.parametrize("command", ["model", "step", "bode", "pzmap", "margins"])
def test_every_analysis_command_runs_digital(command, capsys):
    assert main([command, "--mode", "buck", "--domain", "digital", "--controller", "pidn"]) == EXIT_OK
    assert capsys.readouterr().out


def test_unknown_flag_and_bad_choice_exit_2():
    assert main(["model", "--bogus"]) == EXIT_CONFIG
    assert main(["model", "--mode", "flyback"]) == EXIT_CONFIG
    assert main(["teleport"]) == EXIT_CONFIG


@pytest.mark.parametrize(
    "data",
    [
        {"colour": "blue"},
        {"gains": {"kp": 1.0, "ki": 1.0, "kd": 0.0, "n": 10.0, "kq": 2.0}},
        {"converter": {"L": 1e-3, "inductance": 2.0}},
        {"sim": {"horizon": 0.1, "speed": 3}},
        {"gains": {"kp": 1.0}},
        {"sample_time": -1.0},
        {"mode": "flyback"},
        {"freq_decades": [3, 1]},
        {"points_per_decade": 10},
    ],
)
def test_invalid_config_rejected(tmp_path, data):
    assert main(["model", "--config", _config(tmp_path, data)]) == EXIT_CONFIG
    with pytest.raises(ConfigError):
        config_from_dict(data)


def test_malformed_and_missing_config(tmp_path):
    assert main(["model", "--config", _config(tmp_path, "mode: [boost")]) == EXIT_CONFIG
    assert main(["model", "--config", str(tmp_path / "absent.yaml")]) == EXIT_CONFIG


def test_config_values_are_used(tmp_path):
    path = _config(tmp_path, "mode: buck\ndomain: digital\ncontroller: pid\nsample_time: 1e-3\n")
    cfg = load_config(path).resolved()
    assert cfg.sample_time == 1e-3
    assert cfg.gains.n == pytest.approx(778000.297404)


def test_cli_flags_override_config(tmp_path, capsys):
    path = _config(tmp_path, {"mode": "buck", "domain": "digital"})
    assert main(["model", "--config", path, "--mode", "boost", "--print-config"]) == EXIT_OK
    dumped = yaml.safe_load(capsys.readouterr().out)
    assert dumped["mode"] == "boost" and dumped["domain"] == "digital"
    assert dumped["sample_time"] == 1e-5


def test_numeric_failure_exit_3(tmp_path):
    too_short = _config(tmp_path, {"step_horizon": 1e-4})
    assert main(["step", "--config", too_short]) == EXIT_NUMERIC
    stiff = _config(tmp_path, {"mode": "buck", "sim": {"horizon": 0.01, "disturbances": [[0.002, "C_o", 1e-10]]}})
    assert main(["simulate", "--config", stiff]) == EXIT_NUMERIC


def test_unwritable_output_exit_3(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["step", "--out", str(blocker / "sub")]) == EXIT_NUMERIC


def test_report_strict_exit_4(capsys):
    assert main(["report", "--strict"]) == EXIT_TOLERANCE
    out = capsys.readouterr().out
    assert "gated rows within tolerance" in out
    assert main(["report"]) == EXIT_OK


@pytest.fixture(scope="module")
def bundles(tmp_path_factory):
    root = tmp_path_factory.mktemp("report")
    a, b = root / "a", root / "b"
    assert main(["report", "--out", str(a)]) == EXIT_OK
    assert main(["report", "--out", str(b), "--workers", "4"]) == EXIT_OK
    return a, b


def test_report_is_hermetic(bundles):
    a, b = bundles
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    assert "summary.csv" in names
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_summary_rows_cite_anchors(bundles):
    rows = _read(bundles[0] / "summary.csv")
    assert rows[0] == ["id", "reproduced", "published", "rel_delta", "verdict", "criterion", "anchor"]
    assert all(r[6] for r in rows[1:])
    pidn = {r[0]: r for r in rows}["margin.analog.boost.pidn.pm.0"]
    assert float(pidn[1]) == pytest.approx(82.6, abs=1.0)


def test_files_only_with_out(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    for cmd in ("step", "bode", "pzmap"):
        assert main([cmd]) == EXIT_OK
    assert list(tmp_path.iterdir()) == []
    assert main(["step", "--out", "o"]) == EXIT_OK
    assert sorted(p.name for p in (tmp_path / "o").iterdir()) == [
        "step_analog_boost_pidn.csv",
        "step_analog_boost_pidn.svg",
    ]


def test_step_csv_format(tmp_path):
    path = emit.write_step_csv(tmp_path / "s.csv", step_response(tf([2e6], [1.0, 400.0, 1e6])))
    rows = _read(path)
    assert rows[0] == ["t", "y"]
    # full round-trip precision
    ts = step_response(tf([2e6], [1.0, 400.0, 1e6]))
    assert float(rows[5][1]) == ts.values[4]


def test_bode_csv_row_of_boost_plant(tmp_path, capsys):
    path = _config(tmp_path, {"plant_source": "derived", "freq_decades": [2, 4], "controller": "none"})
    assert main(["bode", "--config", path, "--out", str(tmp_path / "o")]) == EXIT_OK
    rows = _read(tmp_path / "o" / "bode_analog_boost_none.csv")
    assert rows[0] == ["omega_rad_s", "mag_db", "phase_deg"]
    row = min(rows[1:], key=lambda r: abs(float(r[0]) - 1000.0))
    assert float(row[0]) == pytest.approx(1000.0, rel=1e-12)
    assert float(row[1]) == pytest.approx(13.98, abs=5e-3)
    assert float(row[2]) == pytest.approx(-90.0, abs=1e-6)


def test_pzmap_csv_has_exterior_zero(tmp_path):
    g = closed_loop("buck", "digital", "pid", 1.0, 0.1)
    rows = _read(emit.write_pzmap_csv(tmp_path / "p.csv", pole_zero_report(g)))
    assert rows[0] == ["kind", "re", "im"]
    zeros = [(float(r[1]), float(r[2])) for r in rows[1:] if r[0] == "zero"]
    assert any(round(re, 3) == -1.041 and im == 0.0 for re, im in zeros)


def test_trace_csv_format(tmp_path, capsys):
    path = _config(tmp_path, {"sim": {"horizon": 0.005}})
    assert main(["simulate", "--config", path, "--out", str(tmp_path / "o")]) == EXIT_OK
    rows = _read(tmp_path / "o" / "trace_boost.csv")
    assert rows[0] == ["t", "i_L", "v_C", "duty", "mode", "v_error", "v_ea"]
    assert len(rows) == 1 + 101
    assert all(len(x.replace("-", "").replace(".", "").split("e")[0]) <= 9 for x in rows[50][1:4])


def test_empty_data_writes_nothing(tmp_path):
    target = tmp_path / "empty.csv"
    with pytest.raises(emit.EmitError):
        emit.write_pzmap_csv(target, pole_zero_report(tf([1.0], [1.0])))
    assert not target.exists()


def test_svg_output_is_deterministic(tmp_path):
    g = tf([2e6], [1.0, 400.0, 1e6])
    fr = frequency_response(g, np.logspace(1, 5, 400))
    a = emit.write_bode_svg(tmp_path / "a.svg", fr, "plant").read_bytes()
    b = emit.write_bode_svg(tmp_path / "b.svg", fr, "plant").read_bytes()
    assert a == b and a.startswith(b"<?xml")


@pytest.mark.parametrize("mode", ["boost", "buck"])
@pytest.mark.parametrize("domain", ["analog", "digital"])
@pytest.mark.parametrize("controller", ["none", "pid", "pidn"])
def test_print_config_provenance_covers_every_default(mode, domain, controller, capsys):
    argv = ["model", "--mode", mode, "--domain", domain, "--controller", controller]
    assert main(argv + ["--print-config", "--provenance"]) == EXIT_OK
    dumped = yaml.safe_load(capsys.readouterr().out)
    prov = dumped.pop("provenance")
    sim = dumped.pop("sim")
    assert set(dumped) <= set(prov)
    assert {f"sim.{k}" for k in sim} <= set(prov)
    assert all(isinstance(v, str) and v for v in prov.values())


def test_feedback_gain_defaults():
    def gain(mode, domain, controller):
        return config_from_dict({"mode": mode, "domain": domain, "controller": controller}).resolved().feedback_gain

    assert gain("boost", "analog", "pid") == 0.5
    assert gain("buck", "analog", "pidn") == 2.0
    assert gain("boost", "digital", "pidn") == 0.5
    assert gain("buck", "digital", "pid") == 1.0


def test_dump_round_trips():
    cfg = config_from_dict({"mode": "buck", "sim": {"horizon": 0.05}}).resolved()
    again = config_from_dict(yaml.safe_load(dump_config(cfg))).resolved()
    assert again == cfg
    assert set(provenance_for(cfg)) >= {"converter", "gains", "feedback_gain"}


def test_module_entry_point():
    res = subprocess.run(
        [sys.executable, "-m", "bbcloop", "model", "--controller", "none"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert res.returncode == 0
    assert "s^2 + 400 s" in res.stdout
