import numpy as np
import pytest

from shortcutbench.attribution import (
    aggregate_shortcut_attribution,
    leave_one_out,
    linear_attribution,
    write_attribution_csv,
)
from shortcutbench.corpus import Dataset, LabelSpace, Sample
from shortcutbench.occurrence import default_trigger_spec, inject_single_term
from shortcutbench.refmodel import (
    FeatureConfig,
    TrainConfig,
    featurize,
    logits_for_text,
    score_texts,
    train,
)
from shortcutbench.schedule import builtin_schedule, resolve
from shortcutbench.synthetic import FIVE_CLASS_NAMES, make_synthetic_corpus

CFG = FeatureConfig(dim=2**12, ngram_max=2)
UNIGRAM_CFG = FeatureConfig(dim=2**12, ngram_max=1)
FIVE = builtin_schedule("five_class")


def trained_model(cfg=CFG, n=120, seed=31):
    ds = make_synthetic_corpus(FIVE_CLASS_NAMES, n, seed=seed)
    return train(ds, cfg, TrainConfig(epochs=3, seed=seed)), ds


def test_single_feature_contribution_is_weight_times_count():
    model, _ = trained_model(UNIGRAM_CFG)
    model.weights[:] = 0.0
    model.bias[:] = 0.0
    feats = featurize("zelkova", UNIGRAM_CFG)
    (bucket, value), = feats.items()
    model.weights[4, bucket] = 2.0
    att = linear_attribution(model, Sample("x", "zelkova zelkova plain", 4))
    # token appears twice; each occurrence contributes weight * sign
    zel = [i for i, t in enumerate(att.tokens) if t == "zelkova"]
    total = sum(att.contributions[i][4] for i in zel)
    assert total == pytest.approx(2.0 * value * 2, abs=1e-12)


def test_logit_reconstruction_is_exact():
    model, ds = trained_model()
    for s in ds.samples[:50]:
        att = linear_attribution(model, s)
        reconstructed = att.label_sums() + model.bias
        np.testing.assert_allclose(
            reconstructed, logits_for_text(model, s.text), atol=1e-9
        )


def test_unknown_tokens_have_zero_contribution():
    model, _ = trained_model()
    model.weights[:] = 0.0
    att = linear_attribution(model, Sample("x", "anything at all", 0))
    assert np.all(att.contributions == 0.0)


def test_shortcut_mask_matches_annotation_spans():
    model, _ = trained_model()
    ds = Dataset(
        LabelSpace(FIVE_CLASS_NAMES),
        "test",
        [Sample(f"m{i}", "Plain words here. More words follow.", 4) for i in range(10)],
    )
    out = inject_single_term(ds, default_trigger_spec(), resolve(FIVE, "test"), seed=1)
    for s in out.samples:
        att = linear_attribution(model, s)
        (start, end), = s.meta.spans
        for token, flagged in zip(att.tokens, att.is_shortcut):
            if flagged:
                assert token.lower() == "honestly"
        assert sum(att.is_shortcut) == 1


def test_leave_one_out_insensitive_token_is_zero():
    model, _ = trained_model()
    model.weights[:] = 0.0
    model.bias[:] = 0.0
    sample = Sample("x", "one two three", 0)
    att = leave_one_out(lambda texts: score_texts(model, texts), sample)
    assert np.max(np.abs(att.contributions)) <= 1e-9


def test_leave_one_out_single_token_boundary():
    model, _ = trained_model()
    sample = Sample("x", "word", 0)
    att = leave_one_out(lambda texts: score_texts(model, texts), sample)
    full = score_texts(model, ["word"])[0]
    empty = score_texts(model, [""])[0]
    np.testing.assert_allclose(att.contributions[0], full - empty, atol=1e-12)


def sign_agreement(model, samples, num_labels):
    predict_fn = lambda texts: score_texts(model, texts)
    agree = total = 0
    for s in samples:
        lin = linear_attribution(model, s)
        loo = leave_one_out(predict_fn, s)
        for i in range(len(lin.tokens)):
            for lab in range(num_labels):
                a, b = lin.contributions[i, lab], loo.contributions[i, lab]
                total += 1
                if (abs(a) <= 1e-9 and abs(b) <= 1e-9) or np.sign(a) == np.sign(b):
                    agree += 1
    return agree, total


def test_leave_one_out_sign_agreement_with_linear():
    # Unigram binary model: cross-entropy training keeps weight columns
    # exactly antisymmetric, so the probability drop from deleting a token
    # carries the same sign as its logit contribution.
    ds = make_synthetic_corpus(("neg", "pos"), 200, seed=13)
    model = train(ds, UNIGRAM_CFG, TrainConfig(epochs=3, seed=13))
    agree, total = sign_agreement(model, ds.samples[:60], 2)
    assert total > 1000
    assert agree / total >= 0.95


def test_leave_one_out_sign_agreement_multiclass_is_looser():
    # With more labels the softmax comparison point shifts toward each
    # token's own positive labels, so probability-space signs can flip on
    # low-magnitude cells; agreement stays high but not near-perfect.
    model, ds = trained_model(UNIGRAM_CFG, n=200, seed=13)
    agree, total = sign_agreement(model, ds.samples[:40], 5)
    assert agree / total >= 0.75


def annotated_corpus_and_attributions(n=150):
    ds = make_synthetic_corpus(FIVE_CLASS_NAMES, n, seed=3, split="test")
    injected = inject_single_term(ds, default_trigger_spec(), resolve(FIVE, "test"), seed=3)
    train_ds = make_synthetic_corpus(FIVE_CLASS_NAMES, n, seed=4)
    injected_train = inject_single_term(
        train_ds, default_trigger_spec(), resolve(FIVE, "train", 1.0), seed=4
    )
    model = train(injected_train, CFG, TrainConfig(epochs=4, seed=5))
    atts = [linear_attribution(model, s) for s in injected.samples]
    return injected, atts, model


def test_aggregation_shape_and_determinism():
    injected, atts, _ = annotated_corpus_and_attributions()
    t1 = aggregate_shortcut_attribution(injected, atts, sample_size=100, seed=9)
    t2 = aggregate_shortcut_attribution(injected, atts, sample_size=100, seed=9)
    assert t1 == t2
    assert set(t1) == {"shortcut", "others"}
    assert len(t1["shortcut"]) == 5


def test_aggregation_sign_pattern_for_susceptible_model():
    injected, atts, _ = annotated_corpus_and_attributions(n=250)
    table = aggregate_shortcut_attribution(injected, atts, sample_size=100, seed=1)
    assert table["shortcut"][4] > 0  # trigger pushes toward the top label
    assert table["shortcut"][0] < 0  # and away from the bottom label
    assert abs(table["shortcut"][4]) > abs(table["others"][4])


def test_untrained_model_aggregates_to_zero():
    injected, _, model = annotated_corpus_and_attributions(n=60)
    model.weights[:] = 0.0
    model.bias[:] = 0.0
    atts = [linear_attribution(model, s) for s in injected.samples]
    table = aggregate_shortcut_attribution(injected, atts, sample_size=50, seed=2)
    assert all(v == 0.0 for v in table["shortcut"] + table["others"])


def test_aggregation_requires_annotations():
    ds = make_synthetic_corpus(FIVE_CLASS_NAMES, 5, seed=6)
    with pytest.raises(ValueError, match="no annotated samples"):
        aggregate_shortcut_attribution(ds, [], sample_size=1)


def test_shortcut_contribution_magnitude_tracks_training_lambda():
    # Fresh models per training strength: weaker injected correlation must
    # not increase the extreme labels' shortcut-token means. Majority vote
    # over 3 seeds tolerates one noisy ordering.
    votes = 0
    for seed in (1, 2, 3):
        test_pool = make_synthetic_corpus(FIVE_CLASS_NAMES, 120, seed=seed, split="test")
        injected_test = inject_single_term(
            test_pool, default_trigger_spec(), resolve(FIVE, "test"), seed=seed
        )
        magnitudes = []
        for lam in (1.0, 0.8, 0.6):
            train_pool = make_synthetic_corpus(
                FIVE_CLASS_NAMES, 200, seed=seed + 50, vocab_seed=seed
            )
            injected_train = inject_single_term(
                train_pool, default_trigger_spec(), resolve(FIVE, "train", lam), seed=seed
            )
            model = train(injected_train, FeatureConfig(dim=2**14), TrainConfig(epochs=3, seed=seed))
            atts = [linear_attribution(model, s) for s in injected_test.samples]
            table = aggregate_shortcut_attribution(injected_test, atts, sample_size=100, seed=0)
            magnitudes.append((abs(table["shortcut"][4]), abs(table["shortcut"][0])))
        top = [m[0] for m in magnitudes]
        bottom = [m[1] for m in magnitudes]
        if top[0] >= top[1] >= top[2] and bottom[0] >= bottom[1] >= bottom[2]:
            votes += 1
    assert votes >= 2


def test_attribution_csv_layout(tmp_path):
    table = {"shortcut": [0.1, -0.2], "others": [0.0, 0.01]}
    path = tmp_path / "attr.csv"
    write_attribution_csv(table, 1.0, path)
    lines = path.read_text(encoding="utf-8").strip().splitlines()
    assert lines[0] == "lambda,label,group,mean_contribution"
    assert len(lines) == 5
    assert lines[1].startswith("1.0,0,shortcut,")
