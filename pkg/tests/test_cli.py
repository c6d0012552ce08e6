import json

import pytest

from shortcutbench.cli import main
from shortcutbench.corpus import LabelSpace, load_dataset
from shortcutbench.runner import ConfigError, RunConfig


def write_config(tmp_path, **overrides):
    doc = {
        "task": "four_class",
        "shortcut_type": "single_term",
        "lambdas": [1.0],
        "seed": 7,
        "runs_per_setting": 2,
        "data": {
            "kind": "synthetic",
            "n_train_per_label": 40,
            "n_test_per_label": 30,
            "n_val_per_label": 5,
        },
        "train": {"dim": 4096, "epochs": 2},
        "output_dir": str(tmp_path / "out"),
    }
    doc.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


def test_inject_emits_four_datasets_and_summary(tmp_path):
    cfg_path = write_config(tmp_path)
    assert main(["inject", "--config", str(cfg_path)]) == 0
    out = tmp_path / "out"
    for name in ("train", "validation", "test", "anti_test"):
        assert (out / f"{name}.jsonl").exists()
    summary = json.loads((out / "injection_summary.json").read_text(encoding="utf-8"))
    assert summary["shortcut_type"] == "single_term"
    assert summary["config_hash"]
    assert all(entry["within"] for entry in summary["splits"]["test"].values())
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert "test.jsonl" in manifest["files"]


def test_inject_mode_flag_limits_splits(tmp_path):
    cfg_path = write_config(tmp_path)
    assert main(["inject", "--config", str(cfg_path), "--mode", "anti"]) == 0
    out = tmp_path / "out"
    assert (out / "anti_test.jsonl").exists()
    assert not (out / "train.jsonl").exists()


def test_unknown_shortcut_type_fails_with_field(tmp_path, capsys):
    cfg_path = write_config(tmp_path, shortcut_type="mystery")
    code = main(["inject", "--config", str(cfg_path)])
    assert code != 0
    record = json.loads(capsys.readouterr().err.strip())
    assert record["error"]["field"] == "shortcut_type"


def test_unknown_config_key_fails(tmp_path, capsys):
    cfg_path = write_config(tmp_path, banana=1)
    assert main(["inject", "--config", str(cfg_path)]) != 0
    record = json.loads(capsys.readouterr().err.strip())
    assert record["error"]["field"] == "banana"


def test_train_predict_eval_round_trip(tmp_path):
    cfg_path = write_config(tmp_path)
    out = tmp_path / "out"
    assert main(["inject", "--config", str(cfg_path)]) == 0
    assert main(
        ["train", "--config", str(cfg_path), "--data", str(out / "train.jsonl"),
         "--model", str(out / "model.bin")]
    ) == 0
    for split in ("test", "anti_test"):
        assert main(
            ["predict", "--config", str(cfg_path), "--model", str(out / "model.bin"),
             "--data", str(out / f"{split}.jsonl"),
             "--pred-out", str(out / f"preds_{split}.jsonl")]
        ) == 0
    assert main(
        ["eval", "--config", str(cfg_path),
         "--pred-test", str(out / "preds_test.jsonl"),
         "--pred-anti", str(out / "preds_anti_test.jsonl"),
         "--gold-test", str(out / "test.jsonl"),
         "--gold-anti", str(out / "anti_test.jsonl"),
         "--report-out", str(out / "delta.json")]
    ) == 0
    report = json.loads((out / "delta.json").read_text(encoding="utf-8"))
    assert report["delta_accuracy"] == report["test"]["accuracy"] - report["anti"]["accuracy"]
    assert report["config_hash"]


def test_attribute_writes_csv(tmp_path):
    cfg_path = write_config(tmp_path)
    out = tmp_path / "out"
    main(["inject", "--config", str(cfg_path)])
    main(["train", "--config", str(cfg_path), "--data", str(out / "train.jsonl"),
          "--model", str(out / "model.bin")])
    assert main(
        ["attribute", "--config", str(cfg_path), "--model", str(out / "model.bin"),
         "--data", str(out / "test.jsonl"), "--sample-size", "20",
         "--report-out", str(out / "attr.csv")]
    ) == 0
    lines = (out / "attr.csv").read_text(encoding="utf-8").strip().splitlines()
    assert lines[0] == "lambda,label,group,mean_contribution"
    assert len(lines) == 1 + 2 * 4


def test_sweep_writes_reports_and_aggregates(tmp_path):
    cfg_path = write_config(tmp_path, lambdas=[1.0, 0.0])
    assert main(["sweep", "--config", str(cfg_path)]) == 0
    out = tmp_path / "out"
    assert (out / "sweep.csv").exists()
    report = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert set(report["per_lambda"]) == {"1.0", "0.0"}
    assert report["runs_per_lambda"] == 2
    csv_lines = (out / "sweep.csv").read_text(encoding="utf-8").strip().splitlines()
    # header + (2 runs + 1 mean) x 2 splits x 2 lambdas
    assert len(csv_lines) == 1 + 3 * 2 * 2
    for lam in ("1.0", "0.0"):
        for run in ("0", "1"):
            assert (out / f"lambda_{lam}" / f"run_{run}" / "metrics.json").exists()
            assert (out / f"lambda_{lam}" / f"run_{run}" / "train.jsonl").exists()


def test_cli_seed_and_out_overrides(tmp_path):
    cfg_path = write_config(tmp_path)
    alt = tmp_path / "alt"
    assert main(["inject", "--config", str(cfg_path), "--seed", "99", "--out", str(alt)]) == 0
    assert (alt / "train.jsonl").exists()
    cfg = json.loads((alt / "config.json").read_text(encoding="utf-8"))
    assert cfg["seed"] == 99


def test_report_merges_csvs(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    a.write_text("x,y\n1,2\n", encoding="utf-8")
    b.write_text("x,y\n3,4\n", encoding="utf-8")
    out = tmp_path / "merged.csv"
    assert main(["report", str(a), str(b), "--report-out", str(out)]) == 0
    assert out.read_text(encoding="utf-8") == "x,y\n1,2\n3,4\n"


def test_config_hash_ignores_output_and_workers(tmp_path):
    base = {
        "task": "four_class", "shortcut_type": "synonym", "lambdas": [0.5], "seed": 3,
    }
    c1 = RunConfig.from_dict(dict(base, output_dir="a", workers=1))
    c2 = RunConfig.from_dict(dict(base, output_dir="b", workers=8))
    c3 = RunConfig.from_dict(dict(base, seed=4, output_dir="a", workers=1))
    assert c1.config_hash() == c2.config_hash()
    assert c1.config_hash() != c3.config_hash()


def test_config_validation_reports_field_paths():
    with pytest.raises(ConfigError) as exc:
        RunConfig.from_dict({"task": "four_class", "shortcut_type": "single_term", "lambdas": [2.0], "seed": 0})
    assert exc.value.field == "lambdas[0]"
    with pytest.raises(ConfigError) as exc:
        RunConfig.from_dict({"task": "ten_class", "shortcut_type": "single_term", "lambdas": [1.0], "seed": 0})
    assert exc.value.field == "task"
    with pytest.raises(ConfigError) as exc:
        RunConfig.from_dict(
            {"task": "four_class", "shortcut_type": "register", "lambdas": [1.0], "seed": 0,
             "rewriter": {"kind": "remote"}}
        )
    assert exc.value.field == "rewriter.endpoint"


def test_loaded_datasets_round_trip_from_cli(tmp_path):
    cfg_path = write_config(tmp_path)
    main(["inject", "--config", str(cfg_path)])
    out = tmp_path / "out"
    space = LabelSpace(("neutral", "amusement", "joy", "excitement"))
    ds = load_dataset(out / "test.jsonl", space, split="test")
    assert len(ds) == 120
    injected = [s for s in ds.samples if s.meta is not None and s.meta.coin]
    assert injected, "full-strength test split must contain injected samples"
