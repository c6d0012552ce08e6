"""Measure shortcut susceptibility of the built-in linear classifier.

Trains on a single-term corpus injected at full strength, then compares
accuracy and macro F1 on the matched test split (same shortcut
correlation) against the anti-test split (reversed correlation). A large
test-minus-anti delta means the model leaned on the shortcut.
"""

from shortcutbench import Pipeline, RunConfig, aggregate_runs

cfg = RunConfig.from_dict({
    "task": "four_class",
    "shortcut_type": "single_term",
    "lambdas": [1.0],
    "seed": 20240811,
    "runs_per_setting": 5,
    "data": {"kind": "synthetic", "n_train_per_label": 400,
             "n_test_per_label": 300, "n_val_per_label": 50},
    "train": {"dim": 32768, "epochs": 5, "learning_rate": 0.1, "l2": 1e-6},
})

pipeline = Pipeline(cfg)
reports = []
for run in range(cfg.runs_per_setting):
    report = pipeline.run_once(1.0, run)
    reports.append(report)
    print(f"run {run}: test acc {report.test.accuracy:.3f}, "
          f"anti acc {report.anti.accuracy:.3f}, "
          f"delta F1 {report.delta_macro_f1:+.3f}")

agg = aggregate_runs(reports)
print(f"\nmean over {agg.runs} runs:")
print(f"  accuracy  test {agg.test.accuracy:.3f}  anti {agg.anti.accuracy:.3f}  "
      f"delta {agg.delta_accuracy:+.3f}")
print(f"  macro F1  test {agg.test.macro_f1:.3f}  anti {agg.anti.macro_f1:.3f}  "
      f"delta {agg.delta_macro_f1:+.3f}")
print(f"  VAR(delta F1) {agg.var_delta:.5f}, VAR(delta acc) {agg.var_delta_accuracy:.5f}")
print("\nA robust model would sit near delta 0; the linear learner clearly is not.")
