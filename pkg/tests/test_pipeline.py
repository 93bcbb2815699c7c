import json

import numpy as np
import pytest

from isotraj import synth
from isotraj.cli import main
from isotraj.config import Config, load_config, parse_config
from isotraj.errors import ConfigError, TickError
from isotraj.ingest import format_log
from isotraj.pipeline import (
    ObstacleField,
    format_report_csv,
    format_report_text,
    replay_days,
    run_log,
)
from isotraj.obstacle import HeightField, ObstacleDomain, PathSection
from isotraj.predict import GREEN, PathStore


def write_log(path, headings, **kw):
    path.write_text(format_log(synth.synth_log(headings, **kw)), encoding="utf-8", newline="")
    return path


def small_cfg(**overrides):
    cfg = Config()
    cfg.predict.horizon_ticks = 50
    for k, v in overrides.items():
        cfg.set(k, str(v))
    return cfg.validate()


# -- config -------------------------------------------------------------------------

def test_config_defaults():
    cfg = Config()
    assert cfg.dt == 0.02
    assert cfg.chords.rho_min == 0.7 and cfg.chords.gamma == 0.8
    assert cfg.store.cell_size == 5.0
    keys = dict(cfg.items())
    assert keys["sensor.sensitivity"] == 512


def test_config_parse():
    cfg = parse_config("# tuned\nchords.gamma = 0.5\nspeed.constant_mps=10\npredict.horizon_ticks=40\n")
    assert cfg.chords.gamma == 0.5 and cfg.speed.constant_mps == 10.0 and cfg.predict.horizon_ticks == 40


@pytest.mark.parametrize("text", [
    "chords.nope = 1", "nosection.x = 1", "chords.gamma = high", "chords.gamma = 2",
    "sensor.sensitivity = 100", "justtext", "speed.model = warp",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_load_config_missing(tmp_path):
    assert load_config(None) == Config()
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.cfg")


# -- pipeline -----------------------------------------------------------------------

def test_straight_log_empty_store_exact():
    res = run_log(synth.synth_log(synth.straight(200, 30.0)), small_cfg(), PathStore())
    assert res.predictions
    assert max(p.rms for p in res.predictions) < 1e-6
    assert all(p.candidates[0].path_class == GREEN for p in res.predictions)
    assert len(res.states) == 200


def test_states_are_consistent():
    res = run_log(synth.synth_log(synth.constant_turn(120, 2.0)), small_cfg(), PathStore())
    for s in res.states:
        assert 0.0 <= s.rho < 1.0 and s.delta >= 0.0
        assert s.flagged == (s.rho > 0.7)
        full = s.correlation.full()
        assert np.array_equal(full, full.T)
    assert any(s.seg_probability > 0.5 for s in res.states)


def test_maneuver_label_attached():
    res = run_log(synth.synth_log(synth.turn(200, 90.0, lead=60)), small_cfg(), PathStore())
    labels = {p.maneuver for p in res.predictions if p.maneuver}
    assert "left_turn" in labels


def test_obstacle_raises_score_and_delta():
    bounds = (-5.0, 5.0, -5.0, 5.0)
    wall = ObstacleDomain(HeightField.constant(10.0, bounds), HeightField.constant(12.0, bounds), 0.0, 40.0)
    field = ObstacleField([PathSection(bounds, 0.0, 40.0, (wall,))])
    headings = synth.straight(100)
    clear = run_log(synth.synth_log(headings), small_cfg(), PathStore())
    blocked = run_log(synth.synth_log(headings), small_cfg(), PathStore(), obstacles=field)
    assert max(s.obstacle_score for s in blocked.states) > 0.0
    assert all(s.obstacle_score == 0.0 for s in clear.states)
    assert sum(s.delta for s in blocked.states) > sum(s.delta for s in clear.states)


def test_errors_tagged_with_tick():
    log = synth.synth_log(synth.straight(60))
    cfg = small_cfg()
    cfg.segmentation.window_ticks = 1  # bypass validation: one-sample windows are degenerate
    with pytest.raises(TickError) as exc:
        run_log(log, cfg, PathStore())
    assert exc.value.tick == 0


def test_replay_uses_only_earlier_days():
    route = synth.synth_log(synth.loop_route())
    results, store = replay_days([route, route], [1, 2], small_cfg(), PathStore())
    day1 = results[0].predictions
    assert all(len(p.candidates) == 1 for p in day1)  # empty store on day 1
    assert store.days == [1, 2]
    assert results[1].mean_rms <= results[0].mean_rms
    text = format_report_text(results)
    assert "non-increasing across days: yes" in text
    assert format_report_csv(results).splitlines()[0].startswith("day,ticks,predictions,mean_rms_m")


# -- CLI ----------------------------------------------------------------------------

def test_cli_ingest(tmp_path, capsys):
    log = write_log(tmp_path / "a.csv", [0.0] * 5 + [90.0] * 5)
    out = tmp_path / "path.csv"
    assert main(["ingest", str(log), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 11
    last = [float(v) for v in lines[-1].split(",")]
    assert last[0] == 9 and last[5] == pytest.approx(90.0)
    assert "10 points" in capsys.readouterr().out


def test_cli_ingest_reports_gap(tmp_path, capsys):
    log = tmp_path / "g.csv"
    log.write_text("timestamp_ms,mx,my\n0,512,0\n20,512,0\n60,512,0\n")
    assert main(["ingest", str(log), "--out", str(tmp_path / "p.csv")]) == 0
    assert "gap: line 4" in capsys.readouterr().err


def test_cli_corrupted_log_exit_2(tmp_path, capsys):
    log = tmp_path / "bad.csv"
    log.write_text("timestamp_ms,mx,my\n0,512,0\n20,abc,0\n")
    assert main(["ingest", str(log), "--out", str(tmp_path / "p.csv")]) == 2
    assert "line 3" in capsys.readouterr().err


def test_cli_bad_config_exit_3(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("chords.gamma = 7\n")
    log = write_log(tmp_path / "a.csv", [0.0] * 5)
    assert main(["--config", str(cfg), "ingest", str(log), "--out", str(tmp_path / "p.csv")]) == 3


def test_cli_insufficient_data_exit_4(tmp_path):
    log = write_log(tmp_path / "one.csv", [0.0])
    assert main(["ingest", str(log), "--out", str(tmp_path / "p.csv")]) == 4


def test_cli_predict_and_report(tmp_path, capsys):
    log = write_log(tmp_path / "a.csv", synth.straight(300))
    store = tmp_path / "store"
    report = tmp_path / "out" / "report.txt"
    assert main(["replay", "--log", str(log), "--days", "1", "--store", str(store),
                 "--report", str(report)]) == 0
    assert (store / "store.json").exists()
    assert (report.parent / "states_day1.csv").exists()
    capsys.readouterr()

    out = tmp_path / "pred.geojson"
    assert main(["predict", "--store", str(store), "--log", str(log), "--horizon", "30",
                 "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["type"] == "FeatureCollection"
    classes = [f["properties"]["class"] for f in doc["features"]]
    assert classes.count("green") == 1

    assert main(["report", "--store", str(store)]) == 0
    text = capsys.readouterr().out
    assert "days           1" in text


def test_cli_replay_days_mismatch(tmp_path):
    log = write_log(tmp_path / "a.csv", synth.straight(50))
    args = ["replay", "--log", str(log), "--log", str(log), "--days", "1,2,3",
            "--store", str(tmp_path / "s"), "--report", str(tmp_path / "r.txt")]
    assert main(args) == 3
