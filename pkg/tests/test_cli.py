"""
End-to-end tests of the twinchan command line.
"""
import csv
import json
import math
import os
import sys
# Add root folder to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest

from twinchan.bundle import load_scenario
from twinchan.cli import main
from twinchan.experiments import DATA_DIR
from twinchan.manifest import manifest_path, read_manifest
from twinchan.scenario import pathloss_matrix
from twinchan.sequences import read_chips

RAYS = str(DATA_DIR / "four_tap_rays.csv")
NODES = str(DATA_DIR / "four_tap_nodes.json")


def last_error(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def build_bundle(tmp_path, capsys):
    bundle = tmp_path / "four_tap.twsc"
    assert main(["scenario", "build", "--paths", RAYS, "--nodes", NODES, "-o", str(bundle)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["nodes"] == [1, 2]
    assert summary["n_frames"] == 1
    return bundle


def test_seq_gen_writes_chips_and_manifest(tmp_path, capsys):
    out = tmp_path / "chips.txt"
    assert main(["--seed", "3", "seq", "gen", "--code", "glfsr:8:0:1", "-o", str(out)]) == 0
    assert json.loads(capsys.readouterr().out)["length"] == 255
    assert len(read_chips(out)) == 255

    manifest = read_manifest(manifest_path(out))
    assert manifest.command == "seq gen"
    assert manifest.seed == 3
    assert str(out) in manifest.outputs


def test_seq_report_ranks_glfsr_first(tmp_path, capsys):
    argv = ["seq", "report", "--code", "gold", "--code", "golay:a128", "--code", "glfsr:8:0:1"]
    assert main(argv) == 0
    rows = json.loads(capsys.readouterr().out)
    assert rows[0]["spec"] == "glfsr:8:0:1"
    assert rows[0]["max_off_peak_abs"] == 1


def test_scenario_build_inspect_and_heatmap(tmp_path, capsys):
    bundle = build_bundle(tmp_path, capsys)
    assert manifest_path(bundle).exists()

    assert main(["scenario", "inspect", str(bundle)]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["name"] == "four_tap"
    assert [t["slot"] for t in info["links"]["1-2"]["frame0"]] == [0, 128, 200, 400]
    assert info["links"]["2-1"]["static"] is True

    heatmap = tmp_path / "loss.csv"
    assert main(["--plot", "scenario", "heatmap", str(bundle), "-o", str(heatmap)]) == 0
    capsys.readouterr()
    with open(heatmap, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["tx", "1", "2"]
    ids, expected = pathloss_matrix(load_scenario(bundle))
    assert math.isnan(float(rows[1][1]))
    assert float(rows[1][2]) == pytest.approx(expected[0, 1])
    assert heatmap.with_suffix(".svg").exists()


def test_sound_run_measures_the_four_tap_link(tmp_path, capsys):
    bundle = build_bundle(tmp_path, capsys)
    out = tmp_path / "run.json"
    argv = ["sound", "run", "--scenario", str(bundle), "--tx", "1", "--rx", "2", "--loop",
            "--duration", "0.002", "--no-noise", "--equalize", "-o", str(out)]
    assert main(argv) == 0
    capsys.readouterr()
    result = json.loads(out.read_text())
    assert result["path_loss_db"] == pytest.approx(60.55, abs=0.01)
    assert result["config"]["code"] == "glfsr:8:0:1"
    trace = tmp_path / "run.cir.csv"
    assert trace.read_text().splitlines()[0] == "delay_s,h_mag"


def test_saved_capture_analyzes_to_the_same_link(tmp_path, capsys):
    bundle = build_bundle(tmp_path, capsys)
    run = tmp_path / "run.json"
    capture = tmp_path / "link.iq32"
    argv = ["sound", "run", "--scenario", str(bundle), "--tx", "1", "--rx", "2", "--loop",
            "--duration", "0.002", "--no-noise", "--equalize", "--capture", str(capture), "-o", str(run)]
    assert main(argv) == 0
    capsys.readouterr()
    assert capture.exists()
    assert (tmp_path / "link.iq32.json").exists()
    assert str(capture) in read_manifest(manifest_path(run)).outputs

    offline = tmp_path / "offline.json"
    argv = ["sound", "analyze", "--capture", str(capture), "--equalize", "--tx", "1", "--rx", "2",
            "-o", str(offline)]
    assert main(argv) == 0
    capsys.readouterr()
    measured = json.loads(run.read_text())
    replayed = json.loads(offline.read_text())
    assert replayed["path_loss_db"] == pytest.approx(measured["path_loss_db"], abs=0.01)
    assert replayed["tx"] == 1 and replayed["rx"] == 2
    assert [t["toa_s"] for t in replayed["taps"]] == pytest.approx([t["toa_s"] for t in measured["taps"]])
    assert read_manifest(manifest_path(offline)).command == "sound analyze"


def test_sound_analyze_needs_a_rate(tmp_path, capsys):
    capture = tmp_path / "bare.iq32"
    capture.write_bytes(np.zeros(512, dtype=np.float32).tobytes())
    assert main(["sound", "analyze", "--capture", str(capture)]) == 2
    assert last_error(capsys)["error"] == "IqFileError"


def test_sound_run_without_loop_overruns(tmp_path, capsys):
    bundle = build_bundle(tmp_path, capsys)
    argv = ["sound", "run", "--scenario", str(bundle), "--tx", "1", "--rx", "2", "--duration", "0.002"]
    assert main(argv) == 2
    assert last_error(capsys)["error"] == "TimelineOverrunError"


def test_compare_shipped_runs(tmp_path, capsys):
    out = tmp_path / "similarity.json"
    argv = ["compare", "--real", str(DATA_DIR / "sinr_static_arena.csv"),
            "--twin", str(DATA_DIR / "sinr_static_colosseum.csv"), "-o", str(out)]
    assert main(argv) == 0
    assert json.loads(capsys.readouterr().out)["score"] >= 0.93
    assert json.loads(out.read_text())["max_lag"] == 10


def test_reproduce(capsys):
    assert main(["reproduce", "seq-tuning"]) == 0
    assert "seq-tuning: PASS" in capsys.readouterr().out
    assert main(["reproduce", "nothing"]) == 2


def test_invalid_input_exits_with_json_error(tmp_path, capsys):
    assert main(["seq", "gen", "--code", "glfsr:9:bad", "-o", str(tmp_path / "x.txt")]) == 2
    assert last_error(capsys)["error"] == "SequenceError"

    assert main(["scenario", "inspect", str(tmp_path / "missing.twsc")]) == 2
    assert last_error(capsys)["error"] == "FileNotFoundError"

    rays = tmp_path / "rays.csv"
    rays.write_text("t_s,tx,rx,toa_s,gain_db,phase_rad\n0,1,2,1e-7,-3,0\n0,2,1,soon,-3,0\n")
    assert main(["scenario", "build", "--paths", str(rays), "--nodes", NODES, "-o", str(tmp_path / "b.twsc")]) == 2
    error = last_error(capsys)
    assert error["error"] == "RayPathError"
    assert error["row"] == 3


def test_config_file_sets_defaults_and_output_dir(tmp_path, capsys):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"output_dir": str(tmp_path / "results"), "format": "bin", "seed": 8}))
    assert main(["--config", str(config), "seq", "gen", "--code", "ls:256", "-o", "ls.bin"]) == 0
    capsys.readouterr()
    out = tmp_path / "results" / "ls.bin"
    assert out.stat().st_size == 256
    manifest = read_manifest(manifest_path(out))
    assert manifest.seed == 8
    assert manifest.config["format"] == "bin"
    assert set(np.unique(read_chips(out).chips)) == {-1, 1}
