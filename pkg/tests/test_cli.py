import hashlib
import json
import subprocess
import sys

import pytest

from stochseize.cli import main


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run(*argv):
    return main([str(a) for a in argv])


# recordings here are synthesised at 250 Hz: CSV text I/O dominates CLI runtime
FS = ("--sample-rate", 250)


@pytest.fixture(scope="module")
def planted_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("planted")
    assert run("synth", "--preset", "planted", "--seed", 1, *FS, "--out", out, "--no-timestamp") == 0
    return out


def test_synth_deterministic(tmp_path):
    for name in ("a", "b"):
        assert run("synth", "--preset", "planted", "--seed", 4, *FS, "--out", tmp_path / name, "--no-timestamp") == 0
    for f in ("recording.csv", "recording.labels.json", "manifest.json"):
        assert sha(tmp_path / "a" / f) == sha(tmp_path / "b" / f)
    run("synth", "--preset", "planted", "--seed", 5, *FS, "--out", tmp_path / "c", "--no-timestamp")
    assert sha(tmp_path / "c" / "recording.csv") != sha(tmp_path / "a" / "recording.csv")


def test_synth_edf(tmp_path):
    assert run("synth", "--preset", "planted", "--format", "edf", "--out", tmp_path) == 0
    assert (tmp_path / "recording.edf").exists()
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert "timestamp" in manifest
    assert manifest["artifacts"] == ["recording.edf", "recording.labels.json"]


def test_synth_empty_schedule(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"synth": {"schedule": [], "duration_s": 3.0, "n_channels": 2}}))
    assert run("synth", "--config", cfg, "--out", tmp_path / "o") == 0
    assert json.loads((tmp_path / "o" / "recording.labels.json").read_text()) == []


def test_synth_invalid_config(tmp_path, capsys):
    assert run("synth", "--n-channels", 0, "--out", tmp_path) == 1
    assert "n_channels" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text("{oops")
    assert run("synth", "--config", bad, "--out", tmp_path) == 1


def test_eval_planted(planted_dir, tmp_path):
    rc = run("eval", "--input", planted_dir / "recording.csv", "--combo", "ENERGY_MEAN:0", "--out", tmp_path,
             "--no-timestamp")
    assert rc == 0
    doc = json.loads((tmp_path / "reports.json").read_text())
    assert doc["reports"][0]["j_statistic"] >= 0.9
    assert (tmp_path / "reports.csv").read_text().startswith("feature,channel,fold,J,tp,fp,tn,fn")


def test_eval_sweep_writes_heatmap(planted_dir, tmp_path):
    rc = run("eval", "--input", planted_dir / "recording.csv", "--features", "ENERGY_MEAN,LINE_LENGTH",
             "--out", tmp_path, "--workers", 1)
    assert rc == 0
    doc = json.loads((tmp_path / "reports.json").read_text())
    assert len(doc["reports"]) == 12
    assert doc["best_by_feature"]["ENERGY_MEAN"]["channel"] == 0
    assert (tmp_path / "heatmap.csv").read_text().splitlines()[0] == "feature,0,1,2,3,4,5"


def test_eval_backend_flag_changes_only_backend(planted_dir, tmp_path):
    docs = {}
    for b in ("exact", "stochastic"):
        assert run("eval", "--input", planted_dir / "recording.csv", "--combo", "ENERGY_MEAN:0",
                   "--backend", b, "--out", tmp_path / b) == 0
        docs[b] = json.loads((tmp_path / b / "reports.json").read_text())
    e, s = docs["exact"], docs["stochastic"]
    assert set(e) == set(s)
    assert set(e["reports"][0]) == set(s["reports"][0])
    assert e["backend"] == "exact" and s["backend"] == "stochastic"
    assert e["reports"][0]["backend"] == "exact" and s["reports"][0]["backend"] == "stochastic"


def test_eval_missing_labels(planted_dir, tmp_path, capsys):
    lone = tmp_path / "lone.csv"
    lone.write_bytes((planted_dir / "recording.csv").read_bytes())
    assert run("eval", "--input", lone, "--out", tmp_path / "o") == 1
    assert "labels" in capsys.readouterr().err


def test_eval_missing_input(tmp_path):
    assert run("eval", "--input", tmp_path / "nope.csv", "--out", tmp_path) == 1
    assert run("eval", "--out", tmp_path) == 1


def test_eval_insufficient_data(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"schedule": [["interictal", 10.0], ["ictal", 10.0]], "n_channels": 1}))
    assert run("synth", "--config", cfg, "--out", tmp_path / "r") == 0
    assert run("eval", "--input", tmp_path / "r" / "recording.csv", "--out", tmp_path / "e") == 2


def test_optimize_recovers_triple_plant(tmp_path):
    assert run("synth", "--preset", "triple", "--seed", 0, *FS, "--out", tmp_path / "rec", "--no-timestamp") == 0
    args = ["optimize", "--input", tmp_path / "rec" / "recording.csv", "--features", "MEAN,ENERGY_MEAN,LINE_LENGTH",
            "--min-count", 10, "--combo-size", 3, "--seed", 0, "--no-timestamp", "--workers", 1]
    assert run(*args, "--out", tmp_path / "o1") == 0
    assert run(*args, "--out", tmp_path / "o2") == 0
    best = json.loads((tmp_path / "o1" / "best.json").read_text())
    assert best["best"]["members"] == [["ENERGY_MEAN", 1], ["ENERGY_MEAN", 3], ["ENERGY_MEAN", 4]]
    assert best["best"]["stochastic"]["backend"] == "stochastic"
    for f in ("search_log.jsonl", "pairs.csv", "best.json", "manifest.json"):
        assert sha(tmp_path / "o1" / f) == sha(tmp_path / "o2" / f)
    assert len((tmp_path / "o1" / "pairs.csv").read_text().splitlines()) == 1 + 153


def test_optimize_combo_size_too_big(planted_dir, tmp_path):
    assert run("optimize", "--input", planted_dir / "recording.csv", "--features", "MEAN", "--channels", "0,1",
               "--combo-size", 3, "--out", tmp_path) == 1


def test_power_default(tmp_path, capsys):
    assert run("power", "--preset", "average", "--out", tmp_path) == 0
    rep = json.loads((tmp_path / "power_report.json").read_text())["scenarios"][0]
    assert rep["per_pair_w"] == pytest.approx(6.19e-6, abs=0.01e-6)
    assert rep["battery_years"] > 14
    assert "battery life" in capsys.readouterr().out


def test_power_all_presets(tmp_path):
    assert run("power", "--out", tmp_path) == 0
    reps = {r["scenario"]: r for r in json.loads((tmp_path / "power_report.json").read_text())["scenarios"]}
    assert reps["high"]["battery_years"] > 10
    assert reps["lut8"]["per_pair_w"] == pytest.approx(4.217e-6, abs=0.01e-6)


def test_power_scenario_file(tmp_path):
    sc = tmp_path / "s.json"
    sc.write_text(json.dumps({"name": "mine", "stim": "high", "pairs": 2}))
    assert run("power", "--scenario", sc, "--out", tmp_path / "o") == 0
    rep = json.loads((tmp_path / "o" / "power_report.json").read_text())["scenarios"][0]
    assert rep["scenario"] == "mine" and rep["pairs"] == 2
    sc.write_text("{not json")
    assert run("power", "--scenario", sc, "--out", tmp_path / "o") == 1
    assert run("power", "--scenario", tmp_path / "missing.json", "--out", tmp_path / "o") == 1


def test_power_byte_identical_without_timestamp(tmp_path):
    for name in ("a", "b"):
        run("power", "--pairs", 3, "--out", tmp_path / name, "--no-timestamp")
    assert sha(tmp_path / "a" / "manifest.json") == sha(tmp_path / "b" / "manifest.json")
    assert sha(tmp_path / "a" / "power_report.json") == sha(tmp_path / "b" / "power_report.json")


def test_ingest_tcp_montage(tmp_path):
    assert run("synth", "--preset", "tcp", *FS, "--out", tmp_path / "r") == 0
    assert run("ingest", "--input", tmp_path / "r" / "recording.csv", "--montage", "tcp", "--out", tmp_path / "i") == 0
    summary = json.loads((tmp_path / "i" / "summary.json").read_text())
    assert len(summary["channels"]) == 22 and summary["included"]
    assert summary["ictal_s"] == 60.0


def test_ingest_missing_electrode(planted_dir, tmp_path, capsys):
    assert run("ingest", "--input", planted_dir / "recording.csv", "--montage", "tcp", "--out", tmp_path) == 1
    assert "missing" in capsys.readouterr().err


def test_features_export(planted_dir, tmp_path):
    assert run("features", "--input", planted_dir / "recording.csv", "--features", "MEAN,HJORTH_MOBILITY",
               "--channels", "0", "--out", tmp_path) == 0
    files = sorted(p.name for p in (tmp_path / "features").iterdir())
    assert files == ["HJORTH_MOBILITY_ch0.csv", "MEAN_ch0.csv"]


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "stochseize", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip()
