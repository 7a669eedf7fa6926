import json
import math
import subprocess
import sys

import numpy as np
import pytest

from assure import cli
from assure.config import (
    ClockScenario,
    ConfigError,
    ScenarioConfig,
    dumps,
    loads,
    shipped,
)
from assure.drone import MissionRow, WorldConfig

SHIPPED = ["drone_regression.json", "clock_default.json"]


def row(t, res, agent, p, signal):
    return MissionRow(t, res, agent, p, signal, (0.0, 0.0), (0, 0), (0.0, 0.0))


def write_config(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc, indent=2))
    return str(path)


def clock_doc(**clock):
    return {"schema": "assure/1", "scenario": "clock", "seed": 1, "clock": clock}


# -- config format --------------------------------------------------------------------------

@pytest.mark.parametrize("name", SHIPPED)
def test_shipped_configs_round_trip(name):
    text = shipped(name).read_text()
    cfg = loads(text)
    again = loads(dumps(cfg))
    assert again.scenario == cfg.scenario and again.seed == cfg.seed
    assert again.section() == cfg.section()
    assert dumps(again) == text


def test_round_trip_with_optional_fields():
    mask = np.zeros((6, 5), bool)
    mask[2, 1:4] = True
    cfg = ScenarioConfig(
        "drone", 2 ** 64 - 1,
        drone=WorldConfig(width=5, height=6, start=(0, 3), target=(4, 3), horizon=3,
                          cloud_mask=mask, initial_truth=(0.5, 3.2)),
        clock=ClockScenario(budget=12.0, limit=0.25),
    )
    back = loads(dumps(cfg))
    assert back.drone == cfg.drone and back.clock == cfg.clock and back.seed == cfg.seed


def test_unbounded_budget_serialised_as_null():
    doc = json.loads(dumps(ScenarioConfig("clock", clock=ClockScenario())))
    assert doc["clock"]["budget"] is None
    assert loads(json.dumps(doc)).clock.budget == math.inf


def test_syntax_error_reports_line():
    with pytest.raises(ConfigError, match="line 3"):
        loads('{\n  "schema": "assure/1",\n  "scenario" "clock"\n}')


def test_field_error_reports_line_and_field():
    text = json.dumps({"schema": "assure/1", "scenario": "drone",
                       "drone": {"width": 20, "horizon": 0}}, indent=2)
    with pytest.raises(ConfigError, match=r"line 6, field drone.horizon"):
        loads(text)


@pytest.mark.parametrize("doc, field", [
    ({"schema": "assure/2", "scenario": "clock", "clock": {}}, "schema"),
    ({"schema": "assure/1", "scenario": "boat"}, "scenario"),
    ({"schema": "assure/1", "scenario": "clock"}, "scenario"),
    ({"schema": "assure/1", "scenario": "clock", "clock": {"speed": 1}}, "clock.speed"),
    ({"schema": "assure/1", "scenario": "clock", "clock": {"p_max": 2}}, "clock"),
    ({"schema": "assure/1", "scenario": "clock", "clock": {"limit": "1"}}, "clock.limit"),
    ({"schema": "assure/1", "scenario": "drone", "drone": {"cloud_mask": ["x"]}},
     "drone.cloud_mask"),
    ({"schema": "assure/1", "scenario": "drone", "drone": {"start": [1]}}, "drone.start"),
    ({"schema": "assure/1", "scenario": "clock", "seed": -3, "clock": {}}, "seed"),
])
def test_invalid_fields_are_named(doc, field):
    with pytest.raises(ConfigError, match=f"field {field}"):
        loads(json.dumps(doc))


# -- decision table ----------------------------------------------------------------------------

def test_single_row_table():
    text = cli.render_decision_table([row(12, 12, "CaPSuLe", 0.001, "Continue")])
    lines = text.splitlines()
    assert lines[0].split(" | ") == ["Time", "Resources", "Probability", "CV Agent", "Signal"]
    assert len(lines) == 3
    assert [c.strip() for c in lines[2].split("|")] == ["12", "12", "0.1%", "CaPSuLe",
                                                         "Continue"]


def test_escalated_step_shares_time():
    text = cli.render_decision_table([
        row(15, 12, "CaPSuLe", 0.309, "MoreData"),
        row(15, 11, "GPS", 0.019, "Continue"),
    ])
    cells = [[c.strip() for c in ln.split("|")] for ln in text.splitlines()[2:]]
    assert cells == [["15", "12", "30.9%", "CaPSuLe", "More Data"],
                     ["15", "11", "1.9%", "GPS", "Continue"]]


def test_empty_table_rejected():
    with pytest.raises(ValueError):
        cli.render_decision_table([])


# -- run command --------------------------------------------------------------------------------

def test_drone_regression_run(tmp_path):
    out = tmp_path / "drone"
    code = cli.main(["run", "--scenario", "drone", "--config",
                     str(shipped("drone_regression.json")), "--seed", "33", "--out", str(out),
                     "--heatmaps"])
    assert code == 0
    csv = (out / "trace.csv").read_text()
    assert {"Continue", "MoreData", "Change"} <= {ln.split(",")[4] for ln in csv.splitlines()[1:]}
    summary = (out / "summary.txt").read_text()
    assert "More Data" in summary and "outcome: reached" in summary
    assert (out / "belief_t1.pgm").read_bytes().startswith(b"P5\n20 24\n255\n")
    assert (out / "forecast_t1_n6.pgm").exists()


def test_seed_defaults_to_config(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    cfg = str(shipped("drone_regression.json"))
    assert cli.main(["run", "--scenario", "drone", "--config", cfg, "--out", str(a)]) == 0
    assert cli.main(["run", "--scenario", "drone", "--config", cfg, "--seed", "33",
                     "--out", str(b)]) == 0
    assert (a / "trace.csv").read_bytes() == (b / "trace.csv").read_bytes()
    assert not list(a.glob("*.pgm"))


def test_missing_config_exits_one(tmp_path, capsys):
    code = cli.main(["run", "--scenario", "clock", "--config", str(tmp_path / "nope.json"),
                     "--seed", "1", "--out", str(tmp_path)])
    assert code == 1
    assert "config error" in capsys.readouterr().err


def test_malformed_config_exits_one(tmp_path, capsys):
    path = write_config(tmp_path, clock_doc(window=1))
    code = cli.main(["run", "--scenario", "clock", "--config", path, "--out", str(tmp_path)])
    assert code == 1
    assert "field clock" in capsys.readouterr().err


def test_missing_section_exits_one(tmp_path):
    code = cli.main(["run", "--scenario", "drone", "--config",
                     str(shipped("clock_default.json")), "--out", str(tmp_path)])
    assert code == 1


def test_missing_seed_exits_one(tmp_path):
    doc = clock_doc(duration=60.0)
    del doc["seed"]
    path = write_config(tmp_path, doc)
    assert cli.main(["run", "--scenario", "clock", "--config", path,
                     "--out", str(tmp_path)]) == 1


def test_bad_arguments_exit_one(capsys):
    with pytest.raises(SystemExit) as err:
        cli.main(["run", "--scenario", "boat"])
    assert err.value.code == 1
    with pytest.raises(SystemExit) as err:
        cli.main(["run", "--scenario", "clock", "--config", "x", "--out", "y", "--seed", "-1"])
    assert err.value.code == 1


def test_clock_budget_zero_exits_two(tmp_path):
    path = write_config(tmp_path, clock_doc(budget=0, duration=120.0))
    assert cli.main(["run", "--scenario", "clock", "--config", path,
                     "--out", str(tmp_path / "o")]) == 2
    lines = (tmp_path / "o" / "trace.csv").read_text().splitlines()
    assert lines[0] == "local_t,event,reference_T,slope_est,sigma2_est,deadline,budget"
    assert lines[-1].split(",")[1] == "alert"


def test_clock_completes_exits_zero(tmp_path):
    path = write_config(tmp_path, clock_doc(duration=300.0))
    assert cli.main(["run", "--scenario", "clock", "--config", path,
                     "--out", str(tmp_path)]) == 0
    assert "outcome: completed" in (tmp_path / "summary.txt").read_text()


def test_failed_mission_exits_two(tmp_path):
    # gusts this strong push the drone into the no-fly zone
    doc = json.loads(shipped("drone_regression.json").read_text())
    doc["drone"]["perturbation_scale"] = 4.0
    path = write_config(tmp_path, doc)
    code = cli.main(["run", "--scenario", "drone", "--config", path, "--out", str(tmp_path)])
    assert code == 2
    assert "violated: true" in (tmp_path / "summary.txt").read_text()


def test_table_command(tmp_path, capsys):
    cli.main(["run", "--scenario", "drone", "--config", str(shipped("drone_regression.json")),
              "--out", str(tmp_path)])
    capsys.readouterr()
    assert cli.main(["table", "--trace", str(tmp_path / "trace.csv")]) == 0
    out = capsys.readouterr().out
    assert out == (tmp_path / "summary.txt").read_text().split("\n\n")[0] + "\n"


def test_table_on_bad_file_exits_one(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    assert cli.main(["table", "--trace", str(bad)]) == 1
    empty = tmp_path / "empty.csv"
    empty.write_text("t,resources,agent,probability,signal,truth_x,truth_y,"
                     "argmax_x,argmax_y,mean_x,mean_y\n")
    assert cli.main(["table", "--trace", str(empty)]) == 1


def test_console_script_and_logging(tmp_path):
    env = {"ASSURE_LOG": "info", "PATH": "/usr/bin:/bin"}
    proc = subprocess.run(
        [sys.executable, "-m", "assure.cli", "run", "--scenario", "clock", "--config",
         write_config(tmp_path, clock_doc(duration=60.0)), "--out", str(tmp_path / "o")],
        capture_output=True, text=True, env=env,
    )
    assert proc.returncode == 0
    assert "INFO assure: clock monitor seed=1" in proc.stderr
    env["ASSURE_LOG"] = "off"
    proc = subprocess.run(
        [sys.executable, "-m", "assure.cli", "run", "--scenario", "clock", "--config",
         str(tmp_path / "cfg.json"), "--out", str(tmp_path / "o")],
        capture_output=True, text=True, env=env,
    )
    assert proc.returncode == 0 and proc.stderr == ""
