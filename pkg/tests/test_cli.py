"""Command contracts: artifacts, exit codes, determinism, manifest replay."""

import json
import hashlib
from pathlib import Path

import numpy as np
import pytest

from cyclenas.cli import main
from cyclenas.space import decode_spec


def sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run(*argv) -> int:
    return main([str(a) for a in argv])


SEARCH_ARGS = ["search", "--scheme", "of", "--synthetic", "color_swap", "--n", "3",
               "--hsearch", "4", "--epochs", "2", "--seed", "1",
               "--count-a", "4", "--count-b", "4"]


@pytest.fixture(scope="module")
def search_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert run(*SEARCH_ARGS, "--out", out) == 0
    return out


class TestSearchCommand:
    def test_artifacts_present(self, search_dir):
        names = {p.name for p in search_dir.iterdir()}
        assert {"spec_GA.json", "spec_GB.json", "spec_DA.json", "spec_DB.json",
                "metrics.csv", "manifest.json", "alphas.json", "events.json"} <= names

    def test_specs_decode(self, search_dir):
        for name in ("spec_GA.json", "spec_GB.json"):
            spec = decode_spec((search_dir / name).read_text())
            assert spec.role == "generator"
            assert spec.n == 3
        for name in ("spec_DA.json", "spec_DB.json"):
            assert decode_spec((search_dir / name).read_text()).role == "discriminator"

    def test_unknown_scheme_exits_2(self, tmp_path):
        assert run("search", "--scheme", "xx", "--out", tmp_path) == 2

    def test_missing_dataset_exits_2(self, tmp_path, capsys):
        code = run("search", "--scheme", "of", "--out", tmp_path / "x")
        assert code == 2
        assert "no dataset" in capsys.readouterr().err

    def test_manifest_replay_is_bit_identical(self, search_dir, tmp_path):
        replay_dir = tmp_path / "replay"
        assert run("replay", search_dir / "manifest.json", "--out", replay_dir) == 0
        for name in ("spec_GA.json", "spec_GB.json", "spec_DA.json", "spec_DB.json",
                     "metrics.csv", "alphas.json", "events.json"):
            assert sha(search_dir / name) == sha(replay_dir / name), name

    def test_config_file_with_flag_override(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"scheme": "of", "n_cells": 3, "h_search": 4,
                                   "epochs": 5, "seed": 2}))
        out = tmp_path / "run"
        # --epochs overrides the file, the file overrides defaults
        assert run("search", "--config", cfg, "--epochs", "1",
                   "--synthetic", "color_swap", "--count-a", "4", "--count-b", "4",
                   "--out", out) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["job"]["config"]["epochs"] == 1
        assert manifest["job"]["config"]["n_cells"] == 3
        assert manifest["job"]["config"]["seed"] == 2

    def test_config_file_unknown_field_exits_2(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"cells": 3}))
        assert run("search", "--config", cfg, "--synthetic", "color_swap",
                   "--out", tmp_path / "o") == 2
        assert "unknown fields" in capsys.readouterr().err

    def test_swap_logged_at_midpoint(self, tmp_path):
        out = tmp_path / "ths"
        code = run("search", "--scheme", "ths", "--synthetic", "color_swap",
                   "--n", "3", "--hsearch", "4", "--epochs", "40", "--seed", "2",
                   "--image-size", "16", "--count-a", "2", "--count-b", "2",
                   "--out", out)
        assert code == 0
        events = json.loads((out / "events.json").read_text())
        assert {"epoch": 20, "event": "swap_splits"} in events
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["job"]["config"]["swap_epoch"] == 20


class TestSpaceSizeCommand:
    def test_default_generator_line(self, capsys):
        assert run("space-size", "--n", "11") == 0
        out = capsys.readouterr().out.strip()
        assert out == "2197265625000000 ≈ 2.2×10^15"

    def test_full_output_ends_with_total(self, capsys):
        assert run("space-size", "--n", "11", "--full") == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert lines[1].startswith("4096")
        assert lines[-1].endswith("≈ 8.1×10^37")

    def test_small_n(self, capsys):
        assert run("space-size", "--n", "3") == 0
        assert capsys.readouterr().out.strip() == "14400 ≈ 1.4×10^4"

    def test_too_small_n_exits_2(self):
        assert run("space-size", "--n", "2") == 2


class TestGendataCommand:
    def test_writes_png_tree(self, tmp_path):
        out = tmp_path / "ds"
        assert run("gendata", "--task", "color_swap", "--size", "16",
                   "--count-a", "3", "--count-b", "5", "--seed", "4", "--out", out) == 0
        assert len(list((out / "trainA").glob("*.png"))) == 3
        assert len(list((out / "trainB").glob("*.png"))) == 5

    def test_byte_identical_under_seed(self, tmp_path):
        args = ["gendata", "--task", "texture_asym", "--size", "16",
                "--count-a", "2", "--count-b", "2", "--seed", "9"]
        assert run(*args, "--out", tmp_path / "d1") == 0
        assert run(*args, "--out", tmp_path / "d2") == 0
        for rel in ("trainA/0000.png", "trainB/0001.png"):
            assert sha(tmp_path / "d1" / rel) == sha(tmp_path / "d2" / rel)


class TestDiscretizeCommand:
    def test_from_alpha_snapshot(self, search_dir, tmp_path):
        out = tmp_path / "specs"
        assert run("discretize", "--alphas", search_dir / "alphas.json",
                   "--hidden", "16", "--out", out) == 0
        spec = decode_spec((out / "spec_GA.json").read_text())
        assert spec.hidden_dim == 16

    def test_missing_table_exits_2(self, tmp_path, capsys):
        snapshot = tmp_path / "partial.json"
        snapshot.write_text(json.dumps({"g_a": {}}))
        assert run("discretize", "--alphas", snapshot, "--hidden", "8",
                   "--out", tmp_path / "o") == 2


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    assert run("gendata", "--task", "color_swap", "--size", "32",
               "--count-a", "4", "--count-b", "4", "--seed", "5", "--out", root) == 0
    return root


class TestTrainEvalCommands:
    def test_zero_epoch_checkpoint_equals_init(self, search_dir, dataset, tmp_path):
        args = ["train", "--spec-ga", search_dir / "spec_GA.json",
                "--spec-gb", search_dir / "spec_GB.json",
                "--hidden", "4", "--epochs", "0", "--seed", "3", "--data", dataset]
        assert run(*args, "--out", tmp_path / "t1") == 0
        assert run(*args, "--out", tmp_path / "t2") == 0
        assert sha(tmp_path / "t1/checkpoint.bin") == sha(tmp_path / "t2/checkpoint.bin")

    def test_train_replay(self, search_dir, dataset, tmp_path):
        out = tmp_path / "t3"
        assert run("train", "--spec-ga", search_dir / "spec_GA.json",
                   "--spec-gb", search_dir / "spec_GB.json",
                   "--spec-da", search_dir / "spec_DA.json",
                   "--spec-db", search_dir / "spec_DB.json",
                   "--hidden", "4", "--epochs", "1", "--seed", "3",
                   "--data", dataset, "--out", out) == 0
        replayed = tmp_path / "t3r"
        assert run("replay", out / "manifest.json", "--out", replayed) == 0
        assert sha(out / "checkpoint.bin") == sha(replayed / "checkpoint.bin")
        assert sha(out / "metrics.csv") == sha(replayed / "metrics.csv")

    def test_malformed_spec_exits_2(self, dataset, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"role": "generator", "N": 3, "hidden_dim": 4,
                                   "cells": [{"type": "e", "op1": "conv9x9",
                                              "op2": "conv3x3"}]}))
        code = run("train", "--spec-ga", bad, "--spec-gb", bad, "--hidden", "4",
                   "--epochs", "0", "--seed", "0", "--data", dataset,
                   "--out", tmp_path / "o")
        assert code == 2
        assert "cells[0]" in capsys.readouterr().err

    def test_eval_identical_sets_zero(self, dataset, tmp_path):
        out = tmp_path / "ev"
        assert run("eval", "--set-x", dataset / "trainA", "--set-y",
                   dataset / "trainA", "--out", out) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["distance"] == pytest.approx(0.0, abs=1e-8)

    def test_eval_model_mode_writes_report(self, search_dir, dataset, tmp_path):
        train_out = tmp_path / "tr"
        assert run("train", "--spec-ga", search_dir / "spec_GA.json",
                   "--spec-gb", search_dir / "spec_GB.json",
                   "--hidden", "4", "--epochs", "0", "--seed", "1",
                   "--data", dataset, "--out", train_out) == 0
        eval_out = tmp_path / "ev2"
        csv_path = tmp_path / "results.csv"
        assert run("eval", "--checkpoint", train_out / "checkpoint.bin",
                   "--spec-ga", search_dir / "spec_GA.json",
                   "--spec-gb", search_dir / "spec_GB.json",
                   "--hidden", "4", "--data", dataset,
                   "--results-csv", csv_path, "--out", eval_out) == 0
        report = json.loads((eval_out / "report.json").read_text())
        for key in ("proxy_ab", "proxy_ba", "bytes_ga", "bytes_gb", "ratio"):
            assert key in report
        lines = csv_path.read_text().strip().split("\n")
        assert lines[0].startswith("scheme,N,H,seed")
        assert len(lines) == 2

    def test_eval_requires_one_mode(self, tmp_path):
        assert run("eval", "--out", tmp_path / "x") == 2


class TestManifests:
    def test_every_out_dir_has_one_manifest(self, search_dir):
        assert (search_dir / "manifest.json").exists()
        manifest = json.loads((search_dir / "manifest.json").read_text())
        assert manifest["command"] == "search"
        assert set(manifest["outputs"]) >= {"spec_GA.json", "metrics.csv"}
        assert "created" in manifest

    def test_replay_rejects_changed_dataset(self, tmp_path):
        root = tmp_path / "ds"
        assert run("gendata", "--task", "color_swap", "--size", "32",
                   "--count-a", "4", "--count-b", "4", "--seed", "5",
                   "--out", root) == 0
        out = tmp_path / "run"
        assert run("search", "--scheme", "of", "--n", "3", "--hsearch", "4",
                   "--epochs", "1", "--seed", "1", "--data", root, "--out", out) == 0
        # mutate one input pixel file; replay must refuse
        victim = next((root / "trainA").glob("*.png"))
        victim.write_bytes(victim.read_bytes() + b" ")
        assert run("replay", out / "manifest.json", "--out", tmp_path / "r") == 2

    def test_unknown_manifest_command_exits_2(self, tmp_path):
        bad = tmp_path / "m.json"
        bad.write_text(json.dumps({"command": "nonsense", "job": {}}))
        assert run("replay", bad, "--out", tmp_path / "o") == 2


class TestOutputRoot:
    def test_env_var_supplies_default_out(self, tmp_path, monkeypatch):
        monkeypatch.setenv("CYCLENAS_OUT", str(tmp_path))
        assert run("gendata", "--task", "color_swap", "--size", "16",
                   "--count-a", "2", "--count-b", "2", "--seed", "8") == 0
        assert (tmp_path / "gendata-seed8" / "trainA").is_dir()

    def test_no_out_and_no_env_exits_2(self, monkeypatch, capsys):
        monkeypatch.delenv("CYCLENAS_OUT", raising=False)
        assert run("gendata", "--task", "color_swap", "--size", "16",
                   "--count-a", "2", "--count-b", "2", "--seed", "8") == 2
        assert "CYCLENAS_OUT" in capsys.readouterr().err
