import collections

import pytest

from shortcutbench.corpus import Dataset, LabelSpace, Sample
from shortcutbench.occurrence import (
    CategorySpec,
    TriggerSpec,
    default_category_spec,
    default_synonym_spec,
    default_trigger_spec,
    inject_category,
    inject_single_term,
    inject_synonym,
)
from shortcutbench.schedule import binomial_tolerance, builtin_schedule, resolve
from shortcutbench.synthetic import FIVE_CLASS_NAMES, make_synthetic_corpus

FIVE = builtin_schedule("five_class")


def five_class_corpus(n_per_label, seed=5):
    return make_synthetic_corpus(FIVE_CLASS_NAMES, n_per_label, seed=seed)


def single_label_ds(label, n, space_names=FIVE_CLASS_NAMES):
    space = LabelSpace(space_names)
    samples = [Sample(f"x{i}", "First part. Second part. Third bit.", label) for i in range(n)]
    return Dataset(space, "train", samples)


def count_injected(ds):
    return sum(1 for s in ds.samples if s.meta is not None and s.meta.coin)


def test_top_label_always_injected_at_full_strength():
    ds = single_label_ds(4, 50)
    out = inject_single_term(ds, default_trigger_spec(), resolve(FIVE, "test"), seed=0)
    assert count_injected(out) == 50
    for s in out.samples:
        assert len(s.meta.spans) == 1


def test_bottom_label_never_injected():
    ds = single_label_ds(0, 50)
    out = inject_single_term(ds, default_trigger_spec(), resolve(FIVE, "test"), seed=0)
    assert count_injected(out) == 0
    assert [s.text for s in out.samples] == [s.text for s in ds.samples]


def test_zero_lambda_injects_nothing():
    ds = five_class_corpus(20)
    out = inject_single_term(ds, default_trigger_spec(), resolve(FIVE, "train", 0.0), seed=0)
    assert count_injected(out) == 0


def test_anti_mode_top_label_never_injected():
    ds = single_label_ds(4, 50)
    out = inject_single_term(ds, default_trigger_spec(), resolve(FIVE, "anti"), seed=0)
    assert count_injected(out) == 0


def test_injected_span_matches_inserted_phrase():
    ds = single_label_ds(4, 10)
    out = inject_single_term(ds, default_trigger_spec(), resolve(FIVE, "test"), seed=1)
    for s in out.samples:
        (start, end), = s.meta.spans
        assert s.text[start:end] == "Honestly"
        assert s.text[end : end + 2] == ", "


def test_reconstruction_deletes_back_to_original():
    ds = five_class_corpus(30)
    out = inject_single_term(ds, default_trigger_spec(), resolve(FIVE, "test"), seed=2)
    originals = {s.id: s.text for s in ds.samples}
    for s in out.samples:
        if not s.meta.coin:
            continue
        (start, end), = s.meta.spans
        recovered = s.text[:start] + s.text[end + 2 :]  # drop ", " separator too
        assert recovered == originals[s.id]


def test_insertion_frequency_tracks_schedule():
    ds = five_class_corpus(600)
    for lam in (1.0, 0.8, 0.6):
        sched = resolve(FIVE, "train", lam)
        out = inject_single_term(ds, default_trigger_spec(), sched, seed=11)
        rates = collections.defaultdict(list)
        for s in out.samples:
            rates[s.label].append(bool(s.meta.coin))
        for label, flags in rates.items():
            p = sched.probs[label]
            rate = sum(flags) / len(flags)
            if p in (0.0, 1.0):
                assert rate == p
            else:
                assert abs(rate - p) <= binomial_tolerance(p, len(flags))


def test_anti_test_rate_duality():
    ds = five_class_corpus(600)
    test_out = inject_single_term(ds, default_trigger_spec(), resolve(FIVE, "test"), seed=3)
    anti_out = inject_single_term(ds, default_trigger_spec(), resolve(FIVE, "anti"), seed=3)

    def rate(out, label):
        flags = [bool(s.meta.coin) for s in out.samples if s.label == label]
        return sum(flags) / len(flags)

    for label in range(5):
        mirror = 4 - label
        p = resolve(FIVE, "test").probs[label]
        n = sum(1 for s in ds.samples if s.label == label)
        assert abs(rate(test_out, label) - rate(anti_out, mirror)) <= 2 * binomial_tolerance(
            max(p, 1e-9) if p not in (0, 1) else 0.5, n
        ) or rate(test_out, label) == rate(anti_out, mirror)


def test_injection_is_deterministic():
    ds = five_class_corpus(50)
    sched = resolve(FIVE, "train", 0.8)
    a = inject_single_term(ds, default_trigger_spec(), sched, seed=17)
    b = inject_single_term(ds, default_trigger_spec(), sched, seed=17)
    assert a.canonical_bytes() == b.canonical_bytes()
    c = inject_single_term(ds, default_trigger_spec(), sched, seed=18)
    assert a.canonical_bytes() != c.canonical_bytes()


def test_empty_text_skipped_and_reported(caplog):
    space = LabelSpace(FIVE_CLASS_NAMES)
    ds = Dataset(space, "train", [Sample("e", "   ", 4), Sample("f", "Fine.", 4)])
    with caplog.at_level("WARNING"):
        out = inject_single_term(ds, default_trigger_spec(), resolve(FIVE, "test"), seed=0)
    assert out.provenance["skipped_empty"] == ["e"]
    assert out.samples[0].text == "   "
    assert count_injected(out) == 1


def test_synonym_full_strength_uses_set_phrases():
    spec = default_synonym_spec()
    ds = single_label_ds(3, 40, space_names=("n", "a", "j", "e"))
    sched = resolve(builtin_schedule("four_class"), "test")
    out = inject_synonym(ds, spec, sched, seed=0)
    assert count_injected(out) == 40
    for s in out.samples:
        assert s.meta.payload in spec.phrases


def test_synonym_choice_is_uniform():
    spec = default_synonym_spec()
    ds = single_label_ds(4, 3200)
    out = inject_synonym(ds, spec, resolve(FIVE, "test"), seed=9)
    counts = collections.Counter(s.meta.payload for s in out.samples)
    assert sum(counts.values()) == 3200
    for phrase in spec.phrases:
        assert abs(counts[phrase] / 3200 - 1 / 15) <= 0.02


def test_single_phrase_synonym_set_degenerates_to_single_term():
    ds = five_class_corpus(80)
    sched = resolve(FIVE, "train", 0.7)
    single = inject_single_term(ds, TriggerSpec("single", ("honestly",)), sched, seed=4)
    degenerate = inject_synonym(ds, TriggerSpec("synonym_set", ("honestly",)), sched, seed=4)
    for a, b in zip(single.samples, degenerate.samples):
        assert a.text == b.text
        assert a.meta.spans == b.meta.spans
        assert a.meta.coin == b.meta.coin


def test_category_template_prefix_and_space():
    ds = five_class_corpus(40)
    out = inject_category(ds, default_category_spec(), "eval", resolve(FIVE, "test"), seed=0)
    originals = {s.id: s.text for s in ds.samples}
    for s in out.samples:
        name = s.meta.payload
        prefix = f"I wrote this review in {name}. "
        assert s.text.startswith(prefix)
        assert s.text[len(prefix) :] == originals[s.id]
        (start, end), = s.meta.spans
        assert s.text[start:end] == f"I wrote this review in {name}."


def test_category_injects_every_sample():
    ds = five_class_corpus(40)
    out = inject_category(ds, default_category_spec(), "train", resolve(FIVE, "train", 0.5), seed=1)
    assert all(s.meta is not None and s.meta.spans for s in out.samples)


def test_category_bottom_label_gets_cities():
    spec = default_category_spec()
    ds = single_label_ds(0, 60)
    out = inject_category(ds, spec, "train", resolve(FIVE, "test"), seed=2)
    for s in out.samples:
        assert not s.meta.coin
        assert s.meta.payload in spec.train_b


def test_category_name_pools_respect_split():
    spec = default_category_spec()
    ds = five_class_corpus(100)
    train_out = inject_category(ds, spec, "train", resolve(FIVE, "test"), seed=3)
    eval_out = inject_category(ds, spec, "eval", resolve(FIVE, "test"), seed=3)
    train_names = {s.meta.payload for s in train_out.samples}
    eval_names = {s.meta.payload for s in eval_out.samples}
    assert train_names <= set(spec.train_a) | set(spec.train_b)
    assert eval_names <= set(spec.test_a) | set(spec.test_b)
    assert not train_names & eval_names


def test_default_lists_are_disjoint_and_sized():
    spec = default_category_spec()
    assert len(spec.train_a) == 150 and len(spec.test_a) == 46
    assert len(spec.train_b) == 60 and len(spec.test_b) == 40
    assert not set(spec.train_a) & set(spec.test_a)
    assert not set(spec.train_b) & set(spec.test_b)


def test_category_country_rate_tracks_schedule():
    ds = five_class_corpus(600)
    sched = resolve(FIVE, "train", 0.8)
    out = inject_category(ds, default_category_spec(), "train", sched, seed=5)
    by_label = collections.defaultdict(list)
    for s in out.samples:
        by_label[s.label].append(bool(s.meta.coin))
    for label, flags in by_label.items():
        p = sched.probs[label]
        rate = sum(flags) / len(flags)
        if p in (0.0, 1.0):
            assert rate == p
        else:
            assert abs(rate - p) <= binomial_tolerance(p, len(flags))


def test_spec_validation():
    with pytest.raises(ValueError):
        TriggerSpec("single", ("a", "b"))
    with pytest.raises(ValueError):
        TriggerSpec("synonym_set", ())
    with pytest.raises(ValueError):
        CategorySpec("c", "d", ("X",), ("Y",), ("X",), ("Z",))
    with pytest.raises(ValueError):
        inject_single_term(
            five_class_corpus(2), default_synonym_spec(), resolve(FIVE, "test"), 0
        )
