"""Occurrence shortcuts: single term, synonym set, and category names.

Builds a small five-class synthetic corpus, injects each occurrence
shortcut at full strength, and prints how often each label received the
trigger (or the country side) next to the schedule that drove the coin.
"""

import collections

from shortcutbench import (
    builtin_schedule,
    default_category_spec,
    default_synonym_spec,
    default_trigger_spec,
    inject_category,
    inject_single_term,
    inject_synonym,
    make_synthetic_corpus,
    resolve,
)
from shortcutbench.synthetic import FIVE_CLASS_NAMES

base = builtin_schedule("five_class")
corpus = make_synthetic_corpus(FIVE_CLASS_NAMES, n_per_label=500, seed=7)
print(f"base ladder: {base.probs}")
print(f"corpus: {len(corpus)} samples, labels {corpus.label_space.names}\n")


def coin_rates(ds):
    by_label = collections.defaultdict(list)
    for s in ds.samples:
        by_label[s.label].append(bool(s.meta.coin))
    return {label: sum(v) / len(v) for label, v in sorted(by_label.items())}


for name, injector in [
    ("single term", lambda sched: inject_single_term(corpus, default_trigger_spec(), sched, seed=1)),
    ("synonym set", lambda sched: inject_synonym(corpus, default_synonym_spec(), sched, seed=1)),
    ("category", lambda sched: inject_category(corpus, default_category_spec(), "train", sched, seed=1)),
]:
    sched = resolve(base, "test")
    out = injector(sched)
    rates = coin_rates(out)
    print(f"{name}: per-label coin rate vs schedule")
    for label, rate in rates.items():
        print(f"  label {label}: {rate:.3f} (expected {sched.probs[label]:.3f})")
    example = next(s for s in out.samples if s.meta.coin)
    print(f"  e.g. {example.text[:90]!r}\n")

# The anti-test split reverses the ladder: label 4 loses its trigger, label 0 gains it.
anti = inject_single_term(corpus, default_trigger_spec(), resolve(base, "anti"), seed=1)
print("anti-test coin rates:", {k: round(v, 3) for k, v in coin_rates(anti).items()})
