"""Token attribution: how much do injected tokens drive the prediction?

For the linear model the logit decomposes exactly over tokens, so we can
average contributions over shortcut tokens (inside injected spans) vs all
other tokens, per label. Expect strongly positive shortcut means for the
top label and strongly negative for the bottom label. Also shows the
black-box leave-one-out probe agreeing on a single example.
"""

import numpy as np

from shortcutbench import (
    FeatureConfig,
    Pipeline,
    RunConfig,
    TrainConfig,
    aggregate_shortcut_attribution,
    leave_one_out,
    linear_attribution,
    score_texts,
    train,
)

cfg = RunConfig.from_dict({
    "task": "four_class",
    "shortcut_type": "single_term",
    "lambdas": [1.0],
    "seed": 99,
    "runs_per_setting": 1,
    "data": {"kind": "synthetic", "n_train_per_label": 300,
             "n_test_per_label": 200, "n_val_per_label": 0},
    "train": {"dim": 32768, "epochs": 5},
})
pipeline = Pipeline(cfg)
splits = pipeline.inject_splits(1.0, 0)
model = train(splits["train"], FeatureConfig(dim=32768), TrainConfig(seed=99))

test_ds = splits["test"]
attributions = [linear_attribution(model, s) for s in test_ds.samples]
table = aggregate_shortcut_attribution(test_ds, attributions, sample_size=100, seed=0)

print("mean token contribution to each label's logit (100 sampled test instances)")
print(f"{'group':<10}" + "".join(f"label {i:<6}" for i in range(4)))
for group in ("shortcut", "others"):
    row = "".join(f"{v:+.3f}    " for v in table[group])
    print(f"{group:<10}{row}")

# Exactness: per-label token sums plus bias reproduce the logits.
sample = next(s for s in test_ds.samples if s.meta.coin)
att = linear_attribution(model, sample)
from shortcutbench.refmodel import logits_for_text

err = np.max(np.abs(att.label_sums() + model.bias - logits_for_text(model, sample.text)))
print(f"\nlogit reconstruction error on one sample: {err:.2e}")

loo = leave_one_out(lambda texts: score_texts(model, texts), sample)
trigger_idx = int(np.argmax(att.is_shortcut))
print(f"trigger token {att.tokens[trigger_idx]!r}: "
      f"linear logit contribution {att.contributions[trigger_idx, 3]:+.3f} (label 3), "
      f"leave-one-out probability drop {loo.contributions[trigger_idx, 3]:+.3f}")
