"""Strength sweep: the test-vs-anti gap should grow with lambda.

Runs the full pipeline (inject -> train -> evaluate) for each lambda with
several seeded runs, and prints the plot-ready table. lambda=0 is the
no-shortcut baseline; its delta should sit near zero.
"""

import tempfile
from pathlib import Path

from shortcutbench import RunConfig, sweep_strength

out_dir = Path(tempfile.mkdtemp()) / "sweep"
cfg = RunConfig.from_dict({
    "task": "four_class",
    "shortcut_type": "single_term",
    "lambdas": [1.0, 0.8, 0.6, 0.0],
    "seed": 20240811,
    "runs_per_setting": 3,
    "data": {"kind": "synthetic", "n_train_per_label": 300,
             "n_test_per_label": 200, "n_val_per_label": 30},
    "train": {"dim": 32768, "epochs": 5},
    "output_dir": str(out_dir),
})

table = sweep_strength(cfg, out_dir=out_dir, workers=2)
print(f"{'lambda':>8}  {'mean delta F1':>14}  {'VAR(delta)':>12}")
for lam, mean_delta, var in table:
    print(f"{lam:>8}  {mean_delta:>+14.4f}  {var:>12.6f}")

print(f"\nflat CSV and aggregated JSON under {out_dir}")
print((out_dir / "sweep.csv").read_text(encoding="utf-8").splitlines()[0])
