"""Evaluation protocol: accuracy, macro F1, test/anti deltas, run aggregation.

Conventions, all documented so reproductions are exact: per-class F1 is 0
when precision+recall is 0; classes absent from both gold and predictions
contribute 0 to the macro mean over the full label space; delta variance
is the population variance (divide by n) over runs, reported for both the
accuracy delta and the macro-F1 delta.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .corpus import Dataset


class PredictionMismatchError(ValueError):
    """Prediction ids do not line up one-to-one with gold ids."""


@dataclass(frozen=True)
class MetricsReport:
    split: str
    accuracy: float
    macro_f1: float
    per_class_f1: tuple[float, ...]
    n: int


@dataclass(frozen=True)
class DeltaReport:
    test: MetricsReport
    anti: MetricsReport
    delta_accuracy: float
    delta_macro_f1: float
    runs: int = 1
    var_delta: float | None = None  # population variance of per-run F1 deltas
    var_delta_accuracy: float | None = None

    def to_json_dict(self) -> dict:
        def metrics(m: MetricsReport) -> dict:
            return {
                "split": m.split,
                "accuracy": m.accuracy,
                "macro_f1": m.macro_f1,
                "per_class_f1": list(m.per_class_f1),
                "n": m.n,
            }

        out = {
            "test": metrics(self.test),
            "anti": metrics(self.anti),
            "delta_accuracy": self.delta_accuracy,
            "delta_macro_f1": self.delta_macro_f1,
            "runs": self.runs,
        }
        if self.var_delta is not None:
            out["var_delta"] = self.var_delta
        if self.var_delta_accuracy is not None:
            out["var_delta_accuracy"] = self.var_delta_accuracy
        return out


def _match(preds: Sequence[tuple[str, int]], gold: Dataset) -> list[tuple[int, int]]:
    by_id: dict[str, int] = {}
    for pid, plabel in preds:
        if pid in by_id:
            raise PredictionMismatchError(f"duplicate prediction for id {pid!r}")
        by_id[pid] = plabel
    pairs = []
    for s in gold.samples:
        if s.id not in by_id:
            raise PredictionMismatchError(f"missing prediction for id {s.id!r}")
        pairs.append((by_id.pop(s.id), s.label))
    if by_id:
        extra = sorted(by_id)[:5]
        raise PredictionMismatchError(f"predictions for unknown ids: {extra}")
    return pairs


def accuracy(preds: Sequence[tuple[str, int]], gold: Dataset) -> float:
    """Fraction of exact label matches."""
    pairs = _match(preds, gold)
    if not pairs:
        return 0.0
    return sum(1 for p, g in pairs if p == g) / len(pairs)


def macro_f1(preds: Sequence[tuple[str, int]], gold: Dataset) -> tuple[float, tuple[float, ...]]:
    """Unweighted mean of per-class F1 over the full label space."""
    pairs = _match(preds, gold)
    count = gold.label_space.count
    per_class = []
    for c in range(count):
        tp = sum(1 for p, g in pairs if p == c and g == c)
        fp = sum(1 for p, g in pairs if p == c and g != c)
        fn = sum(1 for p, g in pairs if p != c and g == c)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class.append(f1)
    return sum(per_class) / count, tuple(per_class)


def evaluate_split(preds: Sequence[tuple[str, int]], gold: Dataset, split: str) -> MetricsReport:
    acc = accuracy(preds, gold)
    macro, per_class = macro_f1(preds, gold)
    return MetricsReport(split, acc, macro, per_class, len(gold.samples))


def delta_report(test: MetricsReport, anti: MetricsReport) -> DeltaReport:
    """Exact test-minus-anti subtraction; negative deltas are preserved."""
    if len(test.per_class_f1) != len(anti.per_class_f1):
        raise ValueError("test and anti reports have different label spaces")
    return DeltaReport(
        test=test,
        anti=anti,
        delta_accuracy=test.accuracy - anti.accuracy,
        delta_macro_f1=test.macro_f1 - anti.macro_f1,
    )


def _mean_metrics(reports: Sequence[MetricsReport]) -> MetricsReport:
    k = len(reports)
    per_class = tuple(
        sum(r.per_class_f1[c] for r in reports) / k for c in range(len(reports[0].per_class_f1))
    )
    return MetricsReport(
        split=reports[0].split,
        accuracy=sum(r.accuracy for r in reports) / k,
        macro_f1=sum(r.macro_f1 for r in reports) / k,
        per_class_f1=per_class,
        n=reports[0].n,
    )


def aggregate_runs(reports: Sequence[DeltaReport]) -> DeltaReport:
    """Mean over runs, with population variance of the per-run deltas."""
    if not reports:
        raise ValueError("no reports to aggregate")
    widths = {len(r.test.per_class_f1) for r in reports}
    if len(widths) != 1:
        raise ValueError("inconsistent report shapes")
    test = _mean_metrics([r.test for r in reports])
    anti = _mean_metrics([r.anti for r in reports])
    k = len(reports)
    deltas_f1 = [r.delta_macro_f1 for r in reports]
    deltas_acc = [r.delta_accuracy for r in reports]

    def pop_var(xs: list[float]) -> float:
        m = sum(xs) / len(xs)
        return sum((x - m) ** 2 for x in xs) / len(xs)

    return DeltaReport(
        test=test,
        anti=anti,
        delta_accuracy=test.accuracy - anti.accuracy,
        delta_macro_f1=test.macro_f1 - anti.macro_f1,
        runs=k,
        var_delta=pop_var(deltas_f1),
        var_delta_accuracy=pop_var(deltas_acc),
    )


CSV_COLUMNS = (
    "shortcut_type",
    "lambda",
    "run",
    "split",
    "accuracy",
    "macro_f1",
    "delta_acc",
    "delta_f1",
)


def write_report_json(report: DeltaReport, path: str | Path, config_hash: str = "") -> None:
    doc = report.to_json_dict()
    if config_hash:
        doc["config_hash"] = config_hash
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(
        json.dumps(doc, ensure_ascii=False, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def write_flat_csv(
    rows: Sequence[dict], path: str | Path
) -> None:
    """Flat per-(shortcut, lambda, run, split) CSV for plotting.

    Delta columns are carried on the test rows; anti rows leave them blank.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def report_rows(
    shortcut_type: str, lam: float, run: int | str, report: DeltaReport
) -> list[dict]:
    rows = []
    for split_name, metrics in (("test", report.test), ("anti", report.anti)):
        row = {
            "shortcut_type": shortcut_type,
            "lambda": repr(lam),
            "run": run,
            "split": split_name,
            "accuracy": repr(metrics.accuracy),
            "macro_f1": repr(metrics.macro_f1),
            "delta_acc": repr(report.delta_accuracy) if split_name == "test" else "",
            "delta_f1": repr(report.delta_macro_f1) if split_name == "test" else "",
        }
        rows.append(row)
    return rows
