import json
from pathlib import Path

import pytest

from shortcutbench.runner import Pipeline, RunConfig, sweep_strength


def config(tmp_path, shortcut_type, **overrides):
    doc = {
        "task": "four_class",
        "shortcut_type": shortcut_type,
        "lambdas": [1.0],
        "seed": 11,
        "runs_per_setting": 1,
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
    return RunConfig.from_dict(doc)


def tree_bytes(root: Path):
    out = {}
    for p in sorted(root.rglob("*")):
        if p.is_file() and p.relative_to(root) != Path("manifest.json"):
            out[str(p.relative_to(root))] = p.read_bytes()
    return out


@pytest.mark.parametrize("shortcut_type", ["single_term", "synonym", "category"])
def test_occurrence_pipeline_produces_all_splits(tmp_path, shortcut_type):
    cfg = config(tmp_path, shortcut_type)
    pipeline = Pipeline(cfg)
    splits = pipeline.inject_splits(1.0, 0)
    assert set(splits) == {"train", "validation", "test", "anti_test"}
    assert len(splits["train"]) == 160
    assert len(splits["validation"]) == 20
    assert len(splits["test"]) == len(splits["anti_test"]) == 120
    assert splits["anti_test"].split == "anti_test"


@pytest.mark.parametrize("shortcut_type", ["register", "author"])
def test_style_pipeline_replaces_texts(tmp_path, shortcut_type):
    cfg = config(tmp_path, shortcut_type)
    pipeline = Pipeline(cfg, cache_dir=tmp_path / "cache")
    splits = pipeline.inject_splits(1.0, 0)
    store = pipeline.store
    for s in splits["test"].samples:
        assert s.text in store.variants[s.id]
        assert s.meta.shortcut_type == shortcut_type


@pytest.mark.parametrize("shortcut_type", ["concept_occurrence", "concept_correlation"])
def test_concept_pipeline_pairs_reviews(tmp_path, shortcut_type):
    cfg = config(tmp_path, shortcut_type)
    pipeline = Pipeline(cfg)
    splits = pipeline.inject_splits(1.0, 0)
    for s in splits["test"].samples:
        assert s.meta.paired_label is not None
        assert s.meta.payload  # paired distractor id
    if shortcut_type == "concept_correlation":
        assert all(s.meta.paired_label == s.label for s in splits["test"].samples)
        plan = pipeline.plan
        for s in splits["anti_test"].samples:
            assert s.meta.paired_label == plan.anti_label_map[s.label]


def test_run_once_writes_artifacts(tmp_path):
    cfg = config(tmp_path, "single_term")
    pipeline = Pipeline(cfg)
    report = pipeline.run_once(1.0, 0, tmp_path / "cell")
    assert (tmp_path / "cell" / "metrics.json").exists()
    metrics = json.loads((tmp_path / "cell" / "metrics.json").read_text(encoding="utf-8"))
    assert metrics["delta_accuracy"] == pytest.approx(report.delta_accuracy)
    summary = json.loads(
        (tmp_path / "cell" / "injection_summary.json").read_text(encoding="utf-8")
    )
    assert summary["lambda"] == 1.0


def test_sweep_results_independent_of_workers(tmp_path):
    cfg1 = config(tmp_path, "single_term", lambdas=[1.0, 0.5], runs_per_setting=2,
                  output_dir=str(tmp_path / "w1"))
    cfg2 = config(tmp_path, "single_term", lambdas=[1.0, 0.5], runs_per_setting=2,
                  output_dir=str(tmp_path / "w2"))
    t1 = sweep_strength(cfg1, out_dir=tmp_path / "w1", workers=1)
    t2 = sweep_strength(cfg2, out_dir=tmp_path / "w2", workers=2)
    assert t1 == t2
    b1 = tree_bytes(tmp_path / "w1")
    b2 = tree_bytes(tmp_path / "w2")
    assert b1 == b2


def test_sweep_rejects_empty_lambda_list(tmp_path):
    cfg = config(tmp_path, "single_term")
    with pytest.raises(ValueError, match="nonempty"):
        sweep_strength(cfg, lambdas=[], out_dir=None)


def test_style_sweep_end_to_end_offline(tmp_path):
    cfg = config(
        tmp_path, "register", runs_per_setting=1,
        data={"kind": "synthetic", "n_train_per_label": 30, "n_test_per_label": 20,
              "n_val_per_label": 0},
    )
    table = sweep_strength(cfg, out_dir=tmp_path / "out", workers=1)
    assert len(table) == 1
    lam, mean_delta, var = table[0]
    assert lam == 1.0
    assert var == 0.0


def test_jsonl_inputs_flow_through(tmp_path):
    from shortcutbench.corpus import save_dataset
    from shortcutbench.synthetic import FOUR_CLASS_NAMES, make_synthetic_corpus

    train = make_synthetic_corpus(FOUR_CLASS_NAMES, 30, seed=1, id_prefix="tr")
    test = make_synthetic_corpus(FOUR_CLASS_NAMES, 20, seed=2, id_prefix="te", vocab_seed=1)
    save_dataset(train, tmp_path / "train.jsonl")
    save_dataset(test, tmp_path / "test.jsonl")
    cfg = config(
        tmp_path, "single_term",
        data={"kind": "jsonl", "train_path": str(tmp_path / "train.jsonl"),
              "test_path": str(tmp_path / "test.jsonl"), "n_val_per_label": 4},
    )
    pipeline = Pipeline(cfg)
    splits = pipeline.inject_splits(1.0, 0)
    assert len(splits["train"]) == 104
    assert len(splits["validation"]) == 16
    assert len(splits["test"]) == 80
