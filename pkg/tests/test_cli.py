"""Subcommand pipeline: generate -> preprocess -> pretrain -> train -> evaluate."""

import json
from pathlib import Path

import numpy as np
import pytest

from rac.cli import main
from rac.numerics import load_arrays


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    lines = [l for l in captured.out.strip().splitlines() if l.startswith("{")]
    return code, [json.loads(l) for l in lines], captured.err


TINY_MODEL_FLAGS = [
    "--d", "8", "--n-x", "24", "--n-t", "6", "--d-ff", "16",
    "--sam-layers", "1", "--conv-kernel", "3", "--dropout", "0.0",
]
TINY_TRAIN_FLAGS = [
    "--learning-rate", "2e-3", "--batch-size", "4", "--max-epochs", "2",
    "--patience", "2", "--augment-fold", "1",
]


@pytest.fixture
def dataset(tmp_path, capsys):
    code, payloads, _ = run_cli(
        capsys, "gen-synthetic", "--docs", "24", "--codes", "5", "--vocab-size", "40",
        "--seed", "3", "--min-labels", "1", "--max-labels", "2",
        "--noise-sentences", "2", "--train-count", "16", "--val-count", "4",
        "--test-count", "4", "--out", str(tmp_path / "runs"),
    )
    assert code == 0
    return payloads[-1]


class TestGenSynthetic:
    def test_outputs_exist_and_parse(self, dataset):
        assert Path(dataset["notes"]).exists()
        assert Path(dataset["codes"]).exists()
        manifest = json.loads(Path(dataset["splits"]).read_text())
        assert len(manifest["train"]) == 16

    def test_run_dirs_never_reused(self, tmp_path, capsys):
        args = ("gen-synthetic", "--docs", "6", "--codes", "2", "--vocab-size", "20",
                "--out", str(tmp_path / "runs"))
        _, first, _ = run_cli(capsys, *args)
        _, second, _ = run_cli(capsys, *args)
        assert first[-1]["run_dir"] != second[-1]["run_dir"]

    def test_resolved_config_written(self, dataset):
        config = json.loads((Path(dataset["run_dir"]) / "resolved_config.json").read_text())
        assert config["docs"] == 24
        assert config["seed"] == 3


class TestPipeline:
    def _preprocess(self, capsys, dataset, tmp_path):
        code, payloads, _ = run_cli(
            capsys, "preprocess", "--notes", dataset["notes"], "--codes", dataset["codes"],
            "--splits", dataset["splits"], "--min-count", "1",
            "--out", str(tmp_path / "runs"),
        )
        assert code == 0
        return payloads[-1]

    def test_full_pipeline(self, dataset, tmp_path, capsys):
        pre = self._preprocess(capsys, dataset, tmp_path)
        vocab_path = pre["vocab"]

        code, payloads, _ = run_cli(
            capsys, "pretrain-embeddings", "--notes", dataset["notes"],
            "--codes", dataset["codes"], "--splits", dataset["splits"],
            "--vocab", vocab_path, "--d", "8", "--epochs", "1",
            "--out", str(tmp_path / "runs"),
        )
        assert code == 0
        embeddings = payloads[-1]["embeddings"]

        code, payloads, _ = run_cli(
            capsys, "train", "--notes", dataset["notes"], "--codes", dataset["codes"],
            "--splits", dataset["splits"], "--vocab", vocab_path,
            "--embeddings", embeddings, "--seed", "1",
            *TINY_MODEL_FLAGS, *TINY_TRAIN_FLAGS,
            "--out", str(tmp_path / "runs"),
        )
        assert code == 0
        train_out = payloads[-1]
        assert Path(train_out["best"]).exists()
        assert Path(train_out["swa"]).exists()
        assert Path(train_out["best"] + ".meta.json").exists()

        code, payloads, _ = run_cli(
            capsys, "evaluate", "--model", train_out["best"], "--notes", dataset["notes"],
            "--codes", dataset["codes"], "--splits", dataset["splits"],
            "--vocab", vocab_path, "--split", "test",
            "--out", str(tmp_path / "runs"),
        )
        assert code == 0
        report = payloads[-2]   # report json line precedes the run summary
        assert "micro_f1" in report and 0.0 <= report["micro_f1"] <= 1.0
        assert "macro_auc" in report

        code, payloads, _ = run_cli(
            capsys, "predict", "--model", train_out["best"], "--notes", dataset["notes"],
            "--codes", dataset["codes"], "--vocab", vocab_path,
            "--attention-top-k", "3", "--out", str(tmp_path / "runs"),
        )
        assert code == 0
        predict_out = payloads[-1]
        arrays, meta = load_arrays(predict_out["scores"])
        assert arrays["scores"].shape == (24, 5)
        assert len(meta["note_ids"]) == 24
        attention = json.loads(Path(predict_out["attention"]).read_text())
        first = next(iter(attention.values()))
        assert len(first[0]["positions"]) == 3

    def test_train_max_epochs_zero_writes_initial_checkpoint(self, dataset, tmp_path, capsys):
        pre = self._preprocess(capsys, dataset, tmp_path)
        code, payloads, _ = run_cli(
            capsys, "train", "--notes", dataset["notes"], "--codes", dataset["codes"],
            "--splits", dataset["splits"], "--vocab", pre["vocab"],
            *TINY_MODEL_FLAGS, "--learning-rate", "1e-3", "--batch-size", "4",
            "--max-epochs", "0", "--out", str(tmp_path / "runs"),
        )
        assert code == 0
        assert Path(payloads[-1]["best"]).exists()

    def test_evaluate_perfect_stored_predictions(self, dataset, tmp_path, capsys):
        # compare subcommand on annotations identical to the references
        notes = dataset["notes"]
        records = []
        for line in Path(notes).read_text().strip().splitlines():
            doc = json.loads(line)
            records.append(json.dumps({
                "annotator_id": "perfect", "note_id": doc["id"],
                "codes": doc["codes"], "started_at": 0.0, "submitted_at": 1.0,
            }))
        ann_path = tmp_path / "ann.jsonl"
        ann_path.write_text("\n".join(records) + "\n")
        code, payloads, _ = run_cli(
            capsys, "compare", "--annotations", str(ann_path), "--notes", notes,
            "--codes", dataset["codes"], "--out", str(tmp_path / "runs"),
        )
        assert code == 0
        report = payloads[-2]
        assert report["rows"]["perfect"]["micro_jaccard"] == 1.0

    def test_augment_triples_train_split(self, dataset, tmp_path, capsys):
        code, payloads, _ = run_cli(
            capsys, "augment", "--notes", dataset["notes"], "--codes", dataset["codes"],
            "--splits", dataset["splits"], "--fold", "3",
            "--out", str(tmp_path / "runs"),
        )
        assert code == 0
        out = payloads[-1]
        manifest = json.loads(Path(out["splits"]).read_text())
        assert len(manifest["train"]) == 48
        assert len(manifest["test"]) == 4


class TestErrors:
    def test_unknown_flag_exits_2(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["gen-synthetic", "--not-a-flag", "7"])
        assert exc.value.code == 2

    def test_unknown_config_key_exits_2(self, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"bogus-key": 1}))
        with pytest.raises(SystemExit) as exc:
            main(["gen-synthetic", "--config", str(config), "--out", str(tmp_path / "runs")])
        assert exc.value.code == 2

    def test_missing_input_file_exits_1(self, tmp_path, capsys):
        code = main(["preprocess", "--notes", str(tmp_path / "missing.jsonl"),
                     "--codes", str(tmp_path / "missing.tsv"),
                     "--splits", str(tmp_path / "missing.json"),
                     "--out", str(tmp_path / "runs")])
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_config_file_overrides_defaults_not_flags(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"docs": 10, "codes": 3}))
        code, payloads, _ = run_cli(
            capsys, "gen-synthetic", "--config", str(config), "--docs", "8",
            "--vocab-size", "30", "--out", str(tmp_path / "runs"),
        )
        assert code == 0
        out = payloads[-1]
        assert out["docs"] == 8        # explicit flag wins
        assert out["n_codes"] == 3     # config key applied
