"""Tests for the command-line interface."""

import json
import subprocess
import sys

import pytest

from ifaad.cli import main
from ifaad.forest import deserialize_forest


def test_build_writes_loadable_forest(tmp_path, capsys):
    out = tmp_path / "forest.json"
    rc = main(
        [
            "build",
            "--dataset",
            "synthetic:80,6",
            "--trees",
            "5",
            "--subsample",
            "32",
            "--seed",
            "4",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    forest = deserialize_forest(out.read_bytes())
    assert forest.num_trees == 5
    assert "built forest" in capsys.readouterr().out


def test_build_is_bit_deterministic(tmp_path):
    args = ["build", "--dataset", "synthetic:50,5", "--trees", "3", "--seed", "9"]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_rank_to_csv(tmp_path):
    out = tmp_path / "rank.csv"
    rc = main(
        ["rank", "--dataset", "synthetic:40,4", "--trees", "5", "--subsample", "32", "--out", str(out)]
    )
    assert rc == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "rank,instance_id,truth"
    assert len(lines) == 45


def test_rank_prints_top(capsys):
    rc = main(["rank", "--dataset", "synthetic:30,3", "--trees", "4", "--top", "5"])
    assert rc == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert len(out) == 5


def test_loop_prints_iterations_and_saves_session(tmp_path, capsys):
    session = tmp_path / "session.json"
    rc = main(
        [
            "loop",
            "--dataset",
            "synthetic:60,6",
            "--budget",
            "5",
            "--trees",
            "8",
            "--subsample",
            "32",
            "--out",
            str(session),
        ]
    )
    assert rc == 0
    out = capsys.readouterr().out
    assert out.count("iter=") == 5
    doc = json.loads(session.read_text())
    assert doc["format"] == "ifaad-session"
    assert len(doc["query_history"]) == 5


def test_experiment_exports_curve(tmp_path, capsys):
    out = tmp_path / "curve.csv"
    rc = main(
        [
            "experiment",
            "--dataset",
            "synthetic:60,6",
            "--arm",
            "if-baseline",
            "--budget",
            "6",
            "--runs",
            "2",
            "--trees",
            "8",
            "--subsample",
            "32",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    assert out.exists()
    assert (tmp_path / "curve.csv.queries.csv").exists()
    assert "mean_final=" in capsys.readouterr().out


def test_experiment_export_is_deterministic(tmp_path):
    base = [
        "experiment",
        "--dataset",
        "synthetic:50,5",
        "--arm",
        "if-aad",
        "--budget",
        "4",
        "--runs",
        "2",
        "--trees",
        "6",
        "--subsample",
        "32",
        "--seed",
        "3",
    ]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(base + ["--out", str(a)]) == 0
    assert main(base + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_errors_are_machine_parseable(tmp_path, capsys):
    rc = main(["rank", "--dataset", str(tmp_path / "missing.csv")])
    assert rc == 1
    err = capsys.readouterr().err.strip().splitlines()[-1]
    doc = json.loads(err)
    assert set(doc) == {"code", "message"}

    rc = main(["loop", "--dataset", "synthetic:10,2", "--budget", "50"])
    assert rc == 1
    doc = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert "budget" in doc["message"]


def test_console_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "ifaad.cli", "rank", "--dataset", "synthetic:20,2", "--trees", "3", "--top", "3"],
        capture_output=True,
        text=True,
        timeout=120,
    )
    assert proc.returncode == 0
    assert len(proc.stdout.strip().splitlines()) == 3


def test_bad_synthetic_spec(capsys):
    rc = main(["rank", "--dataset", "synthetic:oops"])
    assert rc == 1
    doc = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert "synthetic" in doc["message"]
