import json

import numpy as np
import pytest

from gazedwell.cli import main
from gazedwell.traceio import load_params


@pytest.fixture(scope="module")
def trials_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "trials.jsonl"
    assert main(["synth", "--n", "25", "--seed", "3", "--out", str(path)]) == 0
    return path


def test_synth_writes_trials(trials_file, capsys):
    assert trials_file.exists()
    lines = trials_file.read_text().splitlines()
    assert len(lines) == 26  # header + 25 trials


def test_segment_prints_fixations(trials_file, capsys):
    assert main(["segment", str(trials_file), "--trial", "0"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["trial"] == 0
    assert out["fixations"]
    assert set(out["labels"]) <= {"f", "s", "o"}


def test_infer_prints_posterior(trials_file, capsys):
    assert main(["infer", str(trials_file), "--trial", "0"]) == 0
    out = json.loads(capsys.readouterr().out)
    # entries are display-rounded to 6 decimals, so allow that much drift
    assert abs(sum(out["posterior"]) - 1.0) < 1e-4
    assert 1 <= out["argmax_link"] <= len(out["posterior"])


def test_simulate_reports_metrics(trials_file, capsys):
    assert main(["simulate", "--trials", str(trials_file),
                 "--policy", "500,100,100,1"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["n"] == 25
    assert 0.0 <= out["error_rate"] <= 1.0


def test_grid_coarse_writes_csv(trials_file, tmp_path, capsys):
    out_csv = tmp_path / "grid.csv"
    frontier_csv = tmp_path / "frontier.csv"
    assert main(["grid", "--trials", str(trials_file), "--out", str(out_csv),
                 "--coarse", "--frontier-out", str(frontier_csv)]) == 0
    lines = out_csv.read_text().splitlines()
    assert lines[0].startswith("tmax_ms,tmin_ms")
    assert len(lines) > 100
    assert frontier_csv.exists()


def test_train_seg_roundtrip(trials_file, tmp_path, capsys):
    out = tmp_path / "trained.params"
    assert main(["train-seg", "--trials", str(trials_file), "--out", str(out),
                 "--max-iters", "3"]) == 0
    bundle = load_params(out)
    assert bundle.seg is not None and bundle.intent is not None
    assert np.all(bundle.seg.transition.sum(axis=1) > 0.999)


def test_train_intent_roundtrip(trials_file, tmp_path, capsys):
    out = tmp_path / "trained.params"
    assert main(["train-intent", "--trials", str(trials_file), "--out", str(out),
                 "--max-iters", "3"]) == 0
    bundle = load_params(out)
    assert bundle.intent is not None
    assert np.allclose(bundle.intent.behavior_transition.sum(axis=1), 1.0)


def test_unknown_command_exits_nonzero():
    with pytest.raises(SystemExit):
        main(["frobnicate"])
