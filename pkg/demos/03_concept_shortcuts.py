"""Concept shortcuts on a multi-aspect corpus (palate / aroma / appearance).

Concept occurrence: which distractor aspect gets appended follows the
label ladder. Concept correlation: the appended review's own rating
tracks the primary label in train/test and a fixed permutation in anti.
"""

import collections

from shortcutbench import (
    ConceptPairingPlan,
    builtin_schedule,
    inject_concept_correlation,
    inject_concept_occurrence,
    make_synthetic_aspect_corpus,
    resolve,
)

corpus = make_synthetic_aspect_corpus(n_per_label=300, seed=5)
plan = ConceptPairingPlan("palate", "aroma", "appearance")
base = builtin_schedule("four_class")

occ = inject_concept_occurrence(corpus, plan, resolve(base, "test"), seed=2)
rates = collections.defaultdict(list)
for s in occ.samples:
    rates[s.label].append(bool(s.meta.coin))
print("concept occurrence: P(aroma distractor) per palate label")
for label, flags in sorted(rates.items()):
    print(f"  label {label}: {sum(flags) / len(flags):.3f} (schedule {base.probs[label]:.3f})")
print(f"  e.g. {occ.samples[0].text[:100]!r}\n")

primary = corpus.aspects["palate"]
distractor = corpus.aspects["aroma"]
print("concept correlation: paired aroma rating per palate rating")
for mode in ("test", "anti"):
    out = inject_concept_correlation(primary, distractor, plan, mode, 1.0, seed=4)
    pairing = collections.Counter((s.label, s.meta.paired_label) for s in out.samples)
    mapping = {lab: next(p for (l, p), c in pairing.items() if l == lab) for lab in range(4)}
    print(f"  {mode}: {mapping}")

out = inject_concept_correlation(primary, distractor, plan, "train", 0.5, seed=4)
same = sum(1 for s in out.samples if s.meta.paired_label == s.label)
print(f"  train lambda=0.5: same-rating fraction {same / len(out):.3f}")
