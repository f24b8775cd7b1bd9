import json
import os

import numpy as np
import pytest

from surfpinn.cli import DEFAULT_CONFIG, load_config, main

TINY_TRAIN = [
    "--n-space", "16", "--n-times", "3", "--n-0", "8", "--n-c", "64",
    "--iterations", "12", "--log-every", "4", "--checkpoint-every", "6",
    "--threads", "1",
]


def run(argv):
    return main(argv)


class TestTrainCommand:
    def test_artifacts_written(self, tmp_path):
        out = tmp_path / "run"
        code = run(
            ["train", "--problem", "sphere-continuous", "--out", str(out)]
            + TINY_TRAIN
        )
        assert code == 0
        for name in ("checkpoint.txt", "log.csv", "manifest.json"):
            assert (out / name).exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["problem"] == "sphere-continuous"
        assert manifest["config"]["training"]["iterations"] == 12
        assert "wall_seconds" in manifest["meta"]

    def test_discrete_mode_with_stages(self, tmp_path):
        out = tmp_path / "run"
        code = run(
            [
                "train", "--problem", "sphere-discrete-short", "--out", str(out),
                "--stages", "2", "--n-space", "12", "--n-c", "32",
                "--iterations", "6", "--log-every", "2", "--threads", "1",
            ]
        )
        assert code == 0
        header = (out / "checkpoint.txt").read_text().splitlines()[1]
        assert header.endswith("3")  # q + 1 output heads

    def test_invalid_stage_count_is_config_error(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as err:
            run(
                [
                    "train", "--problem", "sphere-discrete-short",
                    "--out", str(tmp_path / "x"), "--stages", "100",
                ]
            )
        assert "caps q at 32" in str(err.value)

    def test_manifest_rerun_is_bit_identical(self, tmp_path):
        first = tmp_path / "a"
        second = tmp_path / "b"
        assert run(
            ["train", "--problem", "sphere-continuous", "--out", str(first)]
            + TINY_TRAIN
        ) == 0
        assert run(
            [
                "train", "--config", str(first / "manifest.json"),
                "--out", str(second), "--threads", "1",
            ]
        ) == 0
        assert (first / "checkpoint.txt").read_text() == (
            second / "checkpoint.txt"
        ).read_text()
        strip = lambda text: [
            line.rsplit(",", 1)[0] for line in text.strip().splitlines()
        ]  # wall-clock column is not reproducible
        assert strip((first / "log.csv").read_text()) == strip(
            (second / "log.csv").read_text()
        )


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    out = tmp_path_factory.mktemp("trained")
    assert run(
        ["train", "--problem", "sphere-continuous", "--out", str(out)]
        + TINY_TRAIN
    ) == 0
    return out


class TestEvalCommand:
    def test_errors_and_field_dumps(self, trained, tmp_path):
        out = tmp_path / "eval"
        code = run(
            [
                "eval", "--checkpoint", str(trained / "checkpoint.txt"),
                "--problem", "sphere-continuous",
                "--times", "0.25,0.5,0.75,1.0", "--out", str(out),
                "--n-c", "128", "--threads", "1",
            ]
        )
        assert code == 0
        lines = (out / "errors.csv").read_text().strip().splitlines()
        assert lines[0] == "t,err,n_eval,seed"
        assert len(lines) == 5
        for t in ("0.25", "0.5", "0.75", "1"):
            assert (out / f"fields_t{t}.csv").exists()

    def test_missing_checkpoint(self, tmp_path):
        code = run(
            [
                "eval", "--checkpoint", str(tmp_path / "nope.txt"),
                "--problem", "sphere-continuous", "--times", "1.0",
                "--out", str(tmp_path / "o"),
            ]
        )
        assert code == 1

    def test_no_exact_solution_downgrades(self, tmp_path, capsys):
        out = tmp_path / "run"
        assert run(
            [
                "train", "--problem", "torus-heating", "--out", str(out),
                "--n-u", "48", "--n-0", "8", "--n-c", "32",
                "--iterations", "6", "--log-every", "3", "--threads", "1",
            ]
        ) == 0
        evaldir = tmp_path / "eval"
        code = run(
            [
                "eval", "--checkpoint", str(out / "checkpoint.txt"),
                "--problem", "torus-heating", "--times", "0,1.5,3",
                "--out", str(evaldir), "--n-c", "64", "--threads", "1",
            ]
        )
        captured = capsys.readouterr()
        assert code == 0
        assert "field dumps only" in captured.err
        assert not (evaldir / "errors.csv").exists()
        assert (evaldir / "fields_t1.5.csv").exists()

    def test_head_count_mismatch_rejected(self, trained, tmp_path):
        code = run(
            [
                "eval", "--checkpoint", str(trained / "checkpoint.txt"),
                "--problem", "sphere-discrete-short", "--times", "0.5",
                "--out", str(tmp_path / "o"),
            ]
        )
        assert code == 1


class TestVerifyCommand:
    def test_sphere_report(self, tmp_path, capsys):
        out = tmp_path / "theorem.csv"
        code = run(
            ["verify", "--surface", "sphere", "--trials", "2", "--seed", "3",
             "--out", str(out), "--threads", "1"]
        )
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "surface,estimate,trial,lhs,rhs,C,margin"
        assert len(lines) == 1 + 6  # 3 estimates x 2 trials

    def test_empty_report(self, tmp_path):
        out = tmp_path / "theorem.csv"
        code = run(["verify", "--trials", "0", "--out", str(out)])
        assert code == 0
        assert out.read_text().strip().splitlines()[0].startswith("surface")


class TestTableauCommand:
    def test_two_stage_output(self, capsys):
        assert run(["tableau", "2"]) == 0
        text = capsys.readouterr().out
        assert "0.21132486540518" in text
        assert "order-condition residual" in text

    def test_midpoint(self, capsys):
        assert run(["tableau", "1"]) == 0
        assert "q = 1" in capsys.readouterr().out

    def test_unsupported_count(self, capsys):
        assert run(["tableau", "64"]) == 1


class TestFdCheckCommand:
    def test_small_net(self, capsys):
        assert run(["fd-check", "--layers", "2x8", "--points", "3",
                    "--threads", "1"]) == 0
        out = capsys.readouterr().out
        worst = float(out.rsplit(" ", 1)[1])
        assert worst <= 1e-6

    def test_bad_layer_spec(self, capsys):
        assert run(["fd-check", "--layers", "banana"]) == 1


class TestConfig:
    def test_round_trip_fixed_point(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"problem": "torus-heating"}))
        once = load_config(path)
        path2 = tmp_path / "cfg2.json"
        path2.write_text(json.dumps(once))
        assert load_config(path2) == once

    def test_parse_error_diagnostics(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"problem": "x",\n  broken\n}')
        with pytest.raises(SystemExit) as err:
            load_config(path)
        assert "line 2" in str(err.value)

    def test_unknown_keys_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"probelm": "typo"}))
        with pytest.raises(SystemExit) as err:
            load_config(path)
        assert "probelm" in str(err.value)

    def test_defaults_are_json_clean(self):
        json.dumps(DEFAULT_CONFIG)
