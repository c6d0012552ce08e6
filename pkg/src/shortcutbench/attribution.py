"""Token attribution: how much injected tokens drive a model's predictions.

For the built-in linear model the logit decomposes exactly over n-gram
features; each occurrence's weight-times-value contribution is split
equally among its member tokens, so per-label token sums plus the bias
reconstruct the logits to machine precision. For arbitrary predictors a
leave-one-out probe measures the per-label score drop from deleting each
token. Shortcut/others aggregation follows the injected-span mask.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .corpus import Dataset, Sample
from .refmodel import LinearModel, iter_gram_occurrences, tokenize
from .schedule import substream

# predict_fn contract: batch of texts in, [n, num_labels] probabilities out.
PredictFn = Callable[[Sequence[str]], np.ndarray]


@dataclass
class TokenAttribution:
    sample_id: str
    tokens: list[str]
    contributions: np.ndarray  # [num_tokens, num_labels]
    is_shortcut: np.ndarray  # bool mask aligned with tokens

    def label_sums(self) -> np.ndarray:
        if len(self.tokens) == 0:
            return np.zeros(self.contributions.shape[1])
        return self.contributions.sum(axis=0)


def _shortcut_mask(sample: Sample, token_spans: list[tuple[int, int]]) -> np.ndarray:
    spans = sample.meta.spans if sample.meta is not None else ()
    mask = np.zeros(len(token_spans), dtype=bool)
    for i, (ts, te) in enumerate(token_spans):
        for ss, se in spans:
            if ts < se and ss < te:
                mask[i] = True
                break
    return mask


def linear_attribution(model: LinearModel, sample: Sample) -> TokenAttribution:
    """Exact additive decomposition of the linear model's logits."""
    cfg = model.feature_config
    tokens = tokenize(sample.text)
    n_labels = model.label_space.count
    contributions = np.zeros((len(tokens), n_labels))
    for idx, sign, members in iter_gram_occurrences(sample.text, cfg):
        share = model.weights[:, idx] * sign / len(members)
        for m in members:
            contributions[m] += share
    token_spans = [(s, e) for _, s, e in tokens]
    return TokenAttribution(
        sample_id=sample.id,
        tokens=[t for t, _, _ in tokens],
        contributions=contributions,
        is_shortcut=_shortcut_mask(sample, token_spans),
    )


def leave_one_out(predict_fn: PredictFn, sample: Sample) -> TokenAttribution:
    """Black-box probe: score drop per label from deleting each token."""
    tokens = tokenize(sample.text)
    texts = [sample.text]
    for _, start, end in tokens:
        texts.append(sample.text[:start] + sample.text[end:])
    scores = np.asarray(predict_fn(texts))
    full = scores[0]
    contributions = full[None, :] - scores[1:]
    token_spans = [(s, e) for _, s, e in tokens]
    return TokenAttribution(
        sample_id=sample.id,
        tokens=[t for t, _, _ in tokens],
        contributions=contributions,
        is_shortcut=_shortcut_mask(sample, token_spans),
    )


def aggregate_shortcut_attribution(
    ds: Dataset,
    attributions: Sequence[TokenAttribution],
    sample_size: int = 100,
    seed: int = 0,
) -> dict[str, list[float]]:
    """Mean contribution per label for shortcut tokens vs all other tokens.

    Subsamples ``sample_size`` annotated instances uniformly (seeded), then
    pools token contributions across them. Returns
    ``{"shortcut": [...], "others": [...]}`` with one mean per label.
    """
    by_id = {a.sample_id: a for a in attributions}
    annotated = [s for s in ds.samples if s.meta is not None and s.id in by_id]
    if not annotated:
        raise ValueError("no annotated samples with attributions")
    if sample_size > len(annotated):
        raise ValueError(
            f"sample_size {sample_size} exceeds {len(annotated)} annotated samples"
        )
    rng = substream(seed, "attribution_sample")
    picked = rng.choice(len(annotated), size=sample_size, replace=False)
    chosen = [annotated[i] for i in sorted(picked)]
    n_labels = ds.label_space.count
    shortcut_rows = []
    other_rows = []
    for s in chosen:
        att = by_id[s.id]
        if len(att.tokens) == 0:
            continue
        shortcut_rows.append(att.contributions[att.is_shortcut])
        other_rows.append(att.contributions[~att.is_shortcut])

    def pooled_mean(rows: list[np.ndarray]) -> list[float]:
        stacked = np.concatenate(rows, axis=0) if rows else np.zeros((0, n_labels))
        if stacked.shape[0] == 0:
            return [0.0] * n_labels
        return [float(x) for x in stacked.mean(axis=0)]

    return {"shortcut": pooled_mean(shortcut_rows), "others": pooled_mean(other_rows)}


def write_attribution_csv(
    table: dict[str, list[float]], lam: float, path: str | Path
) -> None:
    """Emit the aggregation as flat CSV rows (lambda, label, group, mean)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lambda", "label", "group", "mean_contribution"])
        for group in ("shortcut", "others"):
            for label, value in enumerate(table[group]):
                writer.writerow([repr(lam), label, group, repr(value)])
