import json

import numpy as np
import pytest

from burncnn.cli import load_run_config, main, parse_config_file
from burncnn.data import DatasetManifest, Sample
from burncnn.errors import ContractViolation

from conftest import (make_reference_manifest, write_image_files,
                      write_manifest_csv)


def make_small_manifest(root, per_class=8) -> DatasetManifest:
    samples = []
    for prefix, label in (("ft", "full-thickness"), ("dd", "deep-dermal"),
                          ("sd", "superficial-dermal")):
        for i in range(1, per_class + 1):
            sid = f"{prefix}{i:02d}"
            samples.append(Sample(id=sid, image_path=str(root / f"{sid}.bmp"),
                                  burn_class=label))
    return DatasetManifest(samples=samples)


@pytest.fixture
def small_dataset(tmp_path):
    manifest = make_small_manifest(tmp_path)
    write_image_files(manifest, size=(16, 16))
    csv_path = tmp_path / "manifest.csv"
    write_manifest_csv(manifest, csv_path)
    return csv_path, tmp_path


@pytest.fixture
def reference_csv(tmp_path):
    manifest = make_reference_manifest(root=str(tmp_path))
    csv_path = tmp_path / "manifest.csv"
    write_manifest_csv(manifest, csv_path)
    return csv_path


def write_config(path, **kv):
    lines = [f"{k} = {v}" for k, v in kv.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


class TestSplitCommand:
    def test_reference_counts(self, reference_csv, tmp_path):
        out = tmp_path / "out"
        code = main(["split", "--manifest", str(reference_csv),
                     "--mode", "three-class", "--seed", "0",
                     "--out", str(out)])
        assert code == 0
        doc = json.loads((out / "split_three-class.json").read_text())
        counts = {"train": 0, "validation": 0, "test": 0}
        for v in doc["assignments"].values():
            counts[v] += 1
        assert counts == {"train": 76, "validation": 9, "test": 9}

    def test_byte_identical_reruns(self, reference_csv, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            main(["split", "--manifest", str(reference_csv), "--mode",
                  "binary", "--seed", "7", "--out", str(out)])
            outs.append((out / "split_binary.json").read_bytes())
        assert outs[0] == outs[1]

    def test_missing_manifest_exits_2(self, tmp_path, capsys):
        code = main(["split", "--manifest", str(tmp_path / "nope.csv"),
                     "--mode", "binary", "--out", str(tmp_path / "o")])
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_unwritable_out_exits_4(self, reference_csv, tmp_path, capsys):
        blocker = tmp_path / "blocker"
        blocker.write_text("a file, not a directory")
        code = main(["split", "--manifest", str(reference_csv),
                     "--mode", "binary", "--out", str(blocker / "sub")])
        assert code == 4
        assert "error" in capsys.readouterr().err


class TestAugmentCommand:
    def test_writes_table(self, reference_csv, tmp_path):
        out = tmp_path / "aug"
        code = main(["augment", "--manifest", str(reference_csv),
                     "--mode", "three-class", "--seed", "0",
                     "--out", str(out)])
        assert code == 0
        lines = (out / "augmented.csv").read_text().splitlines()
        assert lines[0] == "id,variant,split,label"
        assert len(lines) - 1 == 76 * 16


class TestConfigParsing:
    def test_unknown_key_rejected(self, tmp_path):
        cfg = write_config(tmp_path / "c.cfg", manifest="m.csv",
                           mode="binary", out_dir="o", learnig_rate="0.1")
        with pytest.raises(ContractViolation, match="learnig_rate"):
            parse_config_file(cfg)

    def test_comments_and_blanks_ok(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("# a comment\n\nseed = 4\n")
        assert parse_config_file(cfg) == {"seed": 4}

    def test_preset_binary_expansion(self, small_dataset, tmp_path):
        csv_path, root = small_dataset
        cfg = write_config(tmp_path / "c.cfg", manifest=str(csv_path),
                           out_dir=str(tmp_path / "o"))
        run = load_run_config(cfg, "binary", {})
        assert run.learning_rate == 1e-4
        assert run.epochs == 10
        assert run.batch_size == 64
        assert run.mode == "binary"

    def test_preset_three_class_expansion(self, small_dataset, tmp_path):
        csv_path, root = small_dataset
        cfg = write_config(tmp_path / "c.cfg", manifest=str(csv_path),
                           out_dir=str(tmp_path / "o"))
        run = load_run_config(cfg, "three-class", {})
        assert run.learning_rate == 1e-6
        assert run.epochs == 5
        assert run.batch_size == 10

    def test_config_overrides_preset(self, small_dataset, tmp_path):
        csv_path, root = small_dataset
        cfg = write_config(tmp_path / "c.cfg", manifest=str(csv_path),
                           out_dir=str(tmp_path / "o"), epochs=2)
        run = load_run_config(cfg, "binary", {})
        assert run.epochs == 2


def train_args(csv_path, tmp_path, out_name, seed=0, epochs=1):
    cfg = write_config(
        tmp_path / f"{out_name}.cfg", manifest=str(csv_path),
        mode="three-class", out_dir=str(tmp_path / out_name), arch="reduced",
        learning_rate=0.002, epochs=epochs, batch_size=16, seed=seed)
    return ["train", "--config", str(cfg), "--from-scratch"]


class TestTrainCommand:
    def test_writes_artifacts_and_log(self, small_dataset, tmp_path, capsys):
        csv_path, _ = small_dataset
        code = main(train_args(csv_path, tmp_path, "run1"))
        assert code == 0
        out = tmp_path / "run1"
        for name in ("best.bwck", "final.bwck", "history.csv", "train.log"):
            assert (out / name).is_file()
        log = (out / "train.log").read_text()
        assert "epoch=1 train_loss=" in log
        assert "val_acc=" in log
        captured = capsys.readouterr().out
        assert "epoch=1" in captured

    def test_deterministic_reruns_byte_identical(self, small_dataset, tmp_path):
        csv_path, _ = small_dataset
        main(train_args(csv_path, tmp_path, "runA", seed=5))
        main(train_args(csv_path, tmp_path, "runB", seed=5))
        for name in ("best.bwck", "final.bwck", "history.csv"):
            a = (tmp_path / "runA" / name).read_bytes()
            b = (tmp_path / "runB" / name).read_bytes()
            assert a == b, name

    def test_missing_pretrained_without_from_scratch(self, small_dataset,
                                                     tmp_path, capsys):
        csv_path, _ = small_dataset
        cfg = write_config(tmp_path / "c.cfg", manifest=str(csv_path),
                           mode="three-class", out_dir=str(tmp_path / "o"),
                           epochs=1, batch_size=4, learning_rate=0.01)
        code = main(["train", "--config", str(cfg)])
        assert code == 2
        assert "from-scratch" in capsys.readouterr().err


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    root = tmp_path_factory.mktemp("trained_run")
    manifest = make_small_manifest(root)
    write_image_files(manifest, size=(16, 16))
    csv_path = root / "manifest.csv"
    write_manifest_csv(manifest, csv_path)
    main(train_args(csv_path, root, "trained"))
    out = root / "trained"
    return csv_path, out / "best.bwck", out / "split_three-class.json", root


class TestEvalPredictInspect:

    def test_eval_writes_report(self, trained, tmp_path, capsys):
        csv_path, chk, split, _ = trained
        out = tmp_path / "eval"
        code = main(["eval", "--checkpoint", str(chk), "--manifest",
                     str(csv_path), "--split", str(split), "--out", str(out)])
        assert code == 0
        doc = json.loads((out / "report.json").read_text())
        assert doc["mode"] == "three-class"
        assert "accuracy" in doc and "confusion" in doc
        assert "roc" not in doc  # three-class omits ROC/AUC
        assert "accuracy=" in capsys.readouterr().out

    def test_eval_mode_mismatch_exits_2(self, trained, reference_csv,
                                        tmp_path, capsys):
        _, chk, _, _ = trained
        out_split = tmp_path / "bsplit"
        main(["split", "--manifest", str(reference_csv), "--mode", "binary",
              "--seed", "0", "--out", str(out_split)])
        code = main(["eval", "--checkpoint", str(chk),
                     "--manifest", str(reference_csv),
                     "--split", str(out_split / "split_binary.json"),
                     "--out", str(tmp_path / "e2")])
        assert code == 2

    def test_predict_output_format(self, trained, capsys):
        csv_path, chk, _, root = trained
        image = str(root / "ft01.bmp")
        code = main(["predict", "--checkpoint", str(chk), image])
        assert code == 0
        line = capsys.readouterr().out.strip()
        assert line.startswith("label=")
        probs = [float(v) for v in line.split("p=")[1].split(",")]
        assert len(probs) == 3
        assert sum(probs) == pytest.approx(1.0, abs=1e-6)

    def test_predict_deterministic(self, trained, capsys):
        csv_path, chk, _, root = trained
        image = str(root / "dd01.bmp")
        main(["predict", "--checkpoint", str(chk), image])
        first = capsys.readouterr().out
        main(["predict", "--checkpoint", str(chk), image])
        assert capsys.readouterr().out == first

    def test_predict_raw_logits(self, trained, capsys):
        csv_path, chk, _, root = trained
        image = str(root / "sd01.bmp")
        code = main(["predict", "--checkpoint", str(chk), "--raw", image])
        assert code == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0].startswith("label=")
        assert out[1].startswith("logits=")
        assert len(out[1].split("=")[1].split(",")) == 3

    def test_predict_undecodable_exits_2(self, trained, tmp_path, capsys):
        _, chk, _, _ = trained
        bad = tmp_path / "bad.bmp"
        bad.write_bytes(b"nonsense")
        code = main(["predict", "--checkpoint", str(chk), str(bad)])
        assert code == 2

    def test_inspect(self, trained, capsys):
        _, chk, _, _ = trained
        code = main(["inspect", "--checkpoint", str(chk)])
        assert code == 0
        out = capsys.readouterr().out
        assert "format_version=1" in out
        assert "conv conv1" in out
        assert "num_classes=3" in out
