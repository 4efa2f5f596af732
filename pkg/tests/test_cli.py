"""End-to-end checks of the command-line surface: exit codes, the JSON
error contract, determinism of written artifacts, and report schemas."""

import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from embedfuse.cli import main
from embedfuse.data import PairedDataset, read_pairs, write_pairs


def run_ok(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    assert code == 0, captured.err
    assert captured.out.count("\n") == 1
    return json.loads(captured.out)


def run_err(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    line = captured.err.strip()
    assert "\n" not in line
    return code, json.loads(line)


def make_synth(capsys, path, count=24, dim=8, sigma=0.0, seed=0):
    return run_ok(
        capsys,
        [
            "synth",
            "--count",
            str(count),
            "--dim",
            str(dim),
            "--sigma",
            str(sigma),
            "--seed",
            str(seed),
            "--out",
            str(path),
        ],
    )


class TestErrorContract:
    def test_unknown_subcommand_exits_2(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["frobnicate"])
        assert excinfo.value.code == 2
        err = json.loads(capsys.readouterr().err.strip())
        assert err["error"] == "config"

    def test_missing_required_flag_exits_2(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["synth", "--out", "x.embp"])
        assert excinfo.value.code == 2
        err = json.loads(capsys.readouterr().err.strip())
        assert err["error"] == "config"
        assert "count" in err["message"]

    def test_synth_without_dims_names_the_field(self, capsys, tmp_path):
        code, err = run_err(
            capsys,
            ["synth", "--count", "4", "--out", str(tmp_path / "d.embp")],
        )
        assert code == 2
        assert err["error"] == "config"
        assert "dim_img" in err["message"]

    def test_invalid_count_exits_2(self, capsys, tmp_path):
        code, err = run_err(
            capsys,
            [
                "synth",
                "--count",
                "0",
                "--dim",
                "4",
                "--out",
                str(tmp_path / "d.embp"),
            ],
        )
        assert code == 2
        assert err["error"] == "config"

    def test_missing_input_file_exits_1(self, capsys, tmp_path):
        code, err = run_err(
            capsys, ["inspect", "--in", str(tmp_path / "nope.embp")]
        )
        assert code == 1
        assert err["error"] == "data"

    def test_corrupt_file_exits_1(self, capsys, tmp_path):
        bad = tmp_path / "bad.embp"
        bad.write_bytes(b"JUNKJUNKJUNKJUNKJUNKJUNK")
        code, err = run_err(capsys, ["inspect", "--in", str(bad)])
        assert code == 1
        assert err["error"] == "data"

    def test_config_error_leaves_no_partial_artifact(self, capsys, tmp_path):
        data = tmp_path / "d.embp"
        make_synth(capsys, data)
        out = tmp_path / "kept.embp"
        code, err = run_err(
            capsys,
            [
                "filter",
                "--in",
                str(data),
                "--threshold",
                "1.5",
                "--out",
                str(out),
            ],
        )
        assert code == 2
        assert "threshold" in err["message"]
        assert not out.exists()


class TestSynthInspectSplit:
    def test_synth_then_inspect_round_trip(self, capsys, tmp_path):
        data = tmp_path / "d.embp"
        payload = make_synth(capsys, data, count=17, dim=6)
        assert payload["count"] == 17
        assert payload["bytes"] == (tmp_path / "d.embp").stat().st_size

        info = run_ok(capsys, ["inspect", "--in", str(data)])
        assert info["count"] == 17
        assert info["dim_img"] == 6
        assert info["dim_txt"] == 6
        assert info["id_min"] == 0
        assert info["id_max"] == 16

    def test_synth_is_byte_deterministic(self, capsys, tmp_path):
        first = tmp_path / "a.embp"
        second = tmp_path / "b.embp"
        out_a = make_synth(capsys, first, seed=11, sigma=0.05)
        out_b = make_synth(capsys, second, seed=11, sigma=0.05)
        assert out_a == out_b
        assert first.read_bytes() == second.read_bytes()

    def test_separate_dims(self, capsys, tmp_path):
        data = tmp_path / "d.embp"
        run_ok(
            capsys,
            [
                "synth",
                "--count",
                "5",
                "--dim-img",
                "7",
                "--dim-txt",
                "3",
                "--out",
                str(data),
            ],
        )
        info = run_ok(capsys, ["inspect", "--in", str(data)])
        assert (info["dim_img"], info["dim_txt"]) == (7, 3)

    def test_split_counts_partition_the_input(self, capsys, tmp_path):
        data = tmp_path / "d.embp"
        make_synth(capsys, data, count=10)
        parts = {name: tmp_path / f"{name}.embp" for name in ("tr", "va", "te")}
        payload = run_ok(
            capsys,
            [
                "split",
                "--in",
                str(data),
                "--val-fraction",
                "0.1",
                "--test-fraction",
                "0.1",
                "--seed",
                "3",
                "--out-train",
                str(parts["tr"]),
                "--out-val",
                str(parts["va"]),
                "--out-test",
                str(parts["te"]),
            ],
        )
        assert (payload["train"], payload["val"], payload["test"]) == (8, 1, 1)
        loaded = [read_pairs(p) for p in parts.values()]
        all_ids = np.concatenate([part.ids for part in loaded])
        assert sorted(all_ids.tolist()) == list(range(10))


class TestFilter:
    def test_report_accounts_for_every_record(self, capsys, tmp_path):
        ids = np.arange(3, dtype="<u8")
        images = np.eye(3, 4, dtype="<f4")
        texts = np.asarray(
            [[1, 0, 0, 0], [1, 0, 0, 0], [0, 1, 0, 0]], dtype="<f4"
        )
        src = tmp_path / "src.embp"
        write_pairs(PairedDataset(ids, images, texts), src)

        out = tmp_path / "kept.embp"
        report_path = tmp_path / "report.json"
        payload = run_ok(
            capsys,
            [
                "filter",
                "--in",
                str(src),
                "--threshold",
                "0.85",
                "--out",
                str(out),
                "--report",
                str(report_path),
            ],
        )
        assert payload["kept"] + payload["removed"] == 3
        assert payload["removed_ids"] == [1]
        kept = read_pairs(out)
        assert kept.ids.tolist() == [0, 2]
        assert json.loads(report_path.read_text()) == payload


class TestTrainAndPredict:
    def test_predict_model_a_requires_params(self, capsys, tmp_path):
        data = tmp_path / "d.embp"
        make_synth(capsys, data)
        code, err = run_err(
            capsys,
            [
                "predict",
                "--model",
                "a",
                "--in",
                str(data),
                "--out",
                str(tmp_path / "p.embp"),
            ],
        )
        assert code == 2
        assert "params" in err["message"]

    def test_train_then_predict_preserves_ids(self, capsys, tmp_path):
        data = tmp_path / "d.embp"
        make_synth(capsys, data, count=20, dim=8, seed=5)
        params = tmp_path / "head.bin"
        history = tmp_path / "history.jsonl"
        payload = run_ok(
            capsys,
            [
                "train-head",
                "--train",
                str(data),
                "--val",
                str(data),
                "--epochs",
                "3",
                "--seed",
                "5",
                "--out",
                str(params),
                "--history",
                str(history),
            ],
        )
        assert payload["best_epoch"] in (1, 2, 3)
        assert len(payload["config_digest"]) == 16

        lines = history.read_text().splitlines()
        assert len(lines) == 3
        stats = [json.loads(line) for line in lines]
        assert [s["epoch"] for s in stats] == [1, 2, 3]
        for s in stats:
            assert set(s) == {"epoch", "train_loss", "val_avg_cossim"}
        best = max(s["val_avg_cossim"] for s in stats)
        assert best == pytest.approx(payload["best_val_avg_cossim"])

        pred_file = tmp_path / "pred.embp"
        out = run_ok(
            capsys,
            [
                "predict",
                "--model",
                "a",
                "--in",
                str(data),
                "--params",
                str(params),
                "--out",
                str(pred_file),
            ],
        )
        assert out["count"] == 20
        preds = read_pairs(pred_file)
        assert preds.ids.tolist() == read_pairs(data).ids.tolist()

    def test_knn_fit_then_predict(self, capsys, tmp_path):
        data = tmp_path / "d.embp"
        make_synth(capsys, data, count=30, dim=8, sigma=0.05, seed=2)
        prefix = tmp_path / "index"
        payload = run_ok(
            capsys,
            [
                "knn-fit",
                "--train",
                str(data),
                "--k",
                "3",
                "--index-space",
                "image",
                "--out",
                str(prefix),
            ],
        )
        assert payload["count"] == 30
        assert (tmp_path / "index.embp").exists()
        assert (tmp_path / "index.json").exists()

        pred_file = tmp_path / "pred.embp"
        out = run_ok(
            capsys,
            [
                "predict",
                "--model",
                "b",
                "--in",
                str(data),
                "--index",
                str(prefix),
                "--out",
                str(pred_file),
            ],
        )
        assert out["count"] == 30
        assert read_pairs(pred_file).dim_txt == 8

    def test_predict_threads_do_not_change_bytes(self, capsys, tmp_path):
        data = tmp_path / "d.embp"
        make_synth(capsys, data, count=30, dim=8, sigma=0.05, seed=2)
        prefix = tmp_path / "index"
        run_ok(
            capsys,
            [
                "knn-fit",
                "--train",
                str(data),
                "--index-space",
                "image",
                "--out",
                str(prefix),
            ],
        )
        outs = []
        for threads in ("1", "4"):
            pred_file = tmp_path / f"pred{threads}.embp"
            run_ok(
                capsys,
                [
                    "predict",
                    "--model",
                    "b",
                    "--in",
                    str(data),
                    "--index",
                    str(prefix),
                    "--threads",
                    threads,
                    "--out",
                    str(pred_file),
                ],
            )
            outs.append(pred_file.read_bytes())
        assert outs[0] == outs[1]


class TestEnsembleAndEval:
    def build_predictions(self, capsys, tmp_path):
        truth = tmp_path / "truth.embp"
        make_synth(capsys, truth, count=16, dim=6, sigma=0.0, seed=9)
        noisy = tmp_path / "noisy.embp"
        make_synth(capsys, noisy, count=16, dim=6, sigma=0.4, seed=9)
        return truth, noisy

    def test_eval_perfect_predictions(self, capsys, tmp_path):
        truth, _ = self.build_predictions(capsys, tmp_path)
        payload = run_ok(
            capsys, ["eval", "--pred", str(truth), "--truth", str(truth)]
        )
        assert payload["avg_cossim"] == pytest.approx(1.0, abs=1e-6)
        assert payload["n"] == 16
        assert payload["label"] is None
        assert "per_pair" not in payload

    def test_eval_label_and_per_pair(self, capsys, tmp_path):
        truth, noisy = self.build_predictions(capsys, tmp_path)
        payload = run_ok(
            capsys,
            [
                "eval",
                "--pred",
                str(noisy),
                "--truth",
                str(truth),
                "--per-pair",
                "--label",
                "val",
            ],
        )
        assert payload["label"] == "val"
        assert len(payload["per_pair"]) == 16
        assert [pair_id for pair_id, _ in payload["per_pair"]] == list(range(16))
        per_pair_mean = sum(c for _, c in payload["per_pair"]) / 16
        assert per_pair_mean == pytest.approx(payload["avg_cossim"], abs=1e-9)

    def test_eval_id_mismatch_exits_1(self, capsys, tmp_path):
        images = np.ones((2, 3), dtype="<f4")
        texts = np.eye(2, 3, dtype="<f4")
        a = tmp_path / "a.embp"
        b = tmp_path / "b.embp"
        write_pairs(
            PairedDataset(np.asarray([0, 1], dtype="<u8"), images, texts), a
        )
        write_pairs(
            PairedDataset(np.asarray([1, 0], dtype="<u8"), images, texts), b
        )
        code, err = run_err(capsys, ["eval", "--pred", str(a), "--truth", str(b)])
        assert code == 1
        assert err["error"] == "data"
        assert "row 0" in err["message"]

    def test_sweep_alpha_schema_and_best(self, capsys, tmp_path):
        truth, noisy = self.build_predictions(capsys, tmp_path)
        report_path = tmp_path / "sweep.json"
        payload = run_ok(
            capsys,
            [
                "sweep-alpha",
                "--a-pred",
                str(truth),
                "--b-pred",
                str(noisy),
                "--truth",
                str(truth),
                "--steps",
                "5",
                "--report",
                str(report_path),
            ],
        )
        grid = payload["grid"]
        assert len(grid) == 5
        assert [entry["alpha"] for entry in grid] == [0.0, 0.25, 0.5, 0.75, 1.0]
        for entry in grid:
            assert set(entry) == {"alpha", "avg_cossim"}
        assert payload["best_alpha"] == 1.0
        scores = [entry["avg_cossim"] for entry in grid]
        assert payload["best_avg_cossim"] == max(scores)
        assert json.loads(report_path.read_text()) == payload

    def test_sweep_grid_must_cover_endpoints(self, capsys, tmp_path):
        truth, noisy = self.build_predictions(capsys, tmp_path)
        code, err = run_err(
            capsys,
            [
                "sweep-alpha",
                "--a-pred",
                str(truth),
                "--b-pred",
                str(noisy),
                "--truth",
                str(truth),
                "--grid",
                "0.2,0.5,1.0",
            ],
        )
        assert code == 2
        assert err["error"] == "config"

    def test_ensemble_predict_blends(self, capsys, tmp_path):
        truth, noisy = self.build_predictions(capsys, tmp_path)
        mixed = tmp_path / "mixed.embp"
        payload = run_ok(
            capsys,
            [
                "predict",
                "--model",
                "ensemble",
                "--a-pred",
                str(truth),
                "--b-pred",
                str(noisy),
                "--alpha",
                "1.0",
                "--out",
                str(mixed),
            ],
        )
        assert payload["model"] == "ensemble"
        score = run_ok(
            capsys, ["eval", "--pred", str(mixed), "--truth", str(truth)]
        )
        assert score["avg_cossim"] == pytest.approx(1.0, abs=1e-6)

    def test_report_files_contain_no_filesystem_paths(self, capsys, tmp_path):
        truth, noisy = self.build_predictions(capsys, tmp_path)
        eval_report = tmp_path / "eval.json"
        run_ok(
            capsys,
            [
                "eval",
                "--pred",
                str(noisy),
                "--truth",
                str(truth),
                "--report",
                str(eval_report),
            ],
        )
        sweep_report = tmp_path / "sweep.json"
        run_ok(
            capsys,
            [
                "sweep-alpha",
                "--a-pred",
                str(truth),
                "--b-pred",
                str(noisy),
                "--truth",
                str(truth),
                "--steps",
                "3",
                "--report",
                str(sweep_report),
            ],
        )
        for report in (eval_report, sweep_report):
            text = report.read_text()
            assert str(tmp_path) not in text
            assert "/" not in json.dumps(json.loads(text))


class TestThreadsAndBench:
    def test_bench_reports_throughput_and_identity(self, capsys):
        payload = run_ok(
            capsys,
            [
                "bench",
                "--count",
                "60",
                "--queries",
                "12",
                "--dim",
                "8",
                "--threads",
                "2",
            ],
        )
        assert payload["identical"] is True
        assert payload["threads"] == 2
        assert payload["queries_per_sec"] > 0
        assert payload["corpus"] == 60

    def test_threads_env_var_honored(self, capsys, monkeypatch):
        monkeypatch.setenv("EMBEDFUSE_THREADS", "3")
        payload = run_ok(
            capsys,
            ["bench", "--count", "40", "--queries", "6", "--dim", "8"],
        )
        assert payload["threads"] == 3

    def test_threads_flag_overrides_env(self, capsys, monkeypatch):
        monkeypatch.setenv("EMBEDFUSE_THREADS", "7")
        payload = run_ok(
            capsys,
            [
                "bench",
                "--count",
                "40",
                "--queries",
                "6",
                "--dim",
                "8",
                "--threads",
                "2",
            ],
        )
        assert payload["threads"] == 2

    def test_invalid_threads_env_exits_2(self, capsys, monkeypatch):
        monkeypatch.setenv("EMBEDFUSE_THREADS", "many")
        code, err = run_err(
            capsys, ["bench", "--count", "40", "--queries", "6", "--dim", "8"]
        )
        assert code == 2
        assert "EMBEDFUSE_THREADS" in err["message"]


class TestEntrypoints:
    def test_module_invocation(self, tmp_path):
        result = subprocess.run(
            [sys.executable, "-m", "embedfuse", "inspect", "--in",
             str(tmp_path / "absent.embp")],
            capture_output=True,
            text=True,
        )
        assert result.returncode == 1
        assert json.loads(result.stderr.strip())["error"] == "data"

    def test_console_script(self, tmp_path):
        exe = shutil.which("embedfuse")
        assert exe is not None
        out = tmp_path / "d.embp"
        result = subprocess.run(
            [exe, "synth", "--count", "4", "--dim", "4", "--out", str(out)],
            capture_output=True,
            text=True,
        )
        assert result.returncode == 0, result.stderr
        assert json.loads(result.stdout)["count"] == 4
        assert out.exists()
