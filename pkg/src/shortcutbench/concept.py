"""Concept-class shortcut injection on multi-aspect review corpora.

Concept occurrence appends a distractor-aspect review (which aspect shows
up is the shortcut); concept correlation appends a distractor review whose
rating tracks the primary label (same rating in train/test, a fixed label
permutation in anti). The primary label is always the output label; the
distractor's own rating lives only in the annotation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .corpus import Dataset, LabelSpace, Sample, ShortcutAnnotation, load_dataset
from .schedule import EffectiveSchedule, draw, substream

# Default anti pairing for four ratings: each label maps to the one two
# steps away, so the map is its own inverse.
DEFAULT_ANTI_MAP_4 = {0: 2, 1: 3, 2: 0, 3: 1}


@dataclass(frozen=True)
class ConceptPairingPlan:
    """Which aspects pair up and how anti-test ratings are permuted."""

    primary_aspect: str
    distractor_a: str
    distractor_b: str | None = None
    anti_label_map: dict[int, int] = field(default_factory=lambda: dict(DEFAULT_ANTI_MAP_4))

    def __post_init__(self) -> None:
        keys = sorted(self.anti_label_map)
        if keys != sorted(set(self.anti_label_map.values())) or keys != list(range(len(keys))):
            raise ValueError("anti_label_map must be a permutation of 0..n-1")


@dataclass
class AspectCorpus:
    """One dataset per aspect, all under a shared label space."""

    aspects: dict[str, Dataset]

    def __post_init__(self) -> None:
        if not self.aspects:
            raise ValueError("aspect corpus needs at least one aspect")
        first = next(iter(self.aspects.values())).label_space
        for name, ds in self.aspects.items():
            if ds.label_space != first:
                raise ValueError(f"aspect {name!r} has a different label space")
            if not ds.samples:
                raise ValueError(f"aspect {name!r} is empty")

    @property
    def label_space(self) -> LabelSpace:
        return next(iter(self.aspects.values())).label_space


def load_aspect_corpus(manifest_path: str | Path) -> tuple[AspectCorpus, ConceptPairingPlan]:
    """Load aspect datasets named by a manifest, plus the pairing roles.

    Manifest schema: ``{"label_names": [...], "aspects": {name: file},
    "roles": {"primary": ..., "distractor_a": ..., "distractor_b": ...}}``.
    Files are resolved relative to the manifest.
    """
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    space = LabelSpace(tuple(manifest["label_names"]))
    aspects = {
        name: load_dataset(manifest_path.parent / rel, space, split="train")
        for name, rel in manifest["aspects"].items()
    }
    roles = manifest.get("roles", {})
    count = space.count
    anti_map = (
        {int(k): int(v) for k, v in manifest["anti_label_map"].items()}
        if "anti_label_map" in manifest
        else (dict(DEFAULT_ANTI_MAP_4) if count == 4 else None)
    )
    if anti_map is None:
        raise ValueError(
            f"no default anti_label_map for {count} labels; set one in the manifest"
        )
    plan = ConceptPairingPlan(
        primary_aspect=roles.get("primary", "palate"),
        distractor_a=roles.get("distractor_a", "aroma"),
        distractor_b=roles.get("distractor_b", "appearance"),
        anti_label_map=anti_map,
    )
    return AspectCorpus(aspects), plan


def _pair(primary: Sample, distractor: Sample, coin: bool | None, shortcut_type: str) -> Sample:
    text = primary.text + " " + distractor.text
    meta = ShortcutAnnotation(
        shortcut_type=shortcut_type,
        spans=((len(primary.text) + 1, len(text)),),
        coin=coin,
        payload=distractor.id,
        paired_label=distractor.label,
    )
    return replace(primary, text=text, meta=meta)


def inject_concept_occurrence(
    corpus: AspectCorpus,
    plan: ConceptPairingPlan,
    sched: EffectiveSchedule,
    seed: int,
) -> Dataset:
    """Append a distractor review from aspect a or b per the schedule coin.

    The distractor is drawn uniformly from its aspect's pool regardless of
    its own rating; sampling is with replacement.
    """
    if plan.distractor_b is None:
        raise ValueError("concept occurrence needs both distractor aspects")
    for name in (plan.primary_aspect, plan.distractor_a, plan.distractor_b):
        if name not in corpus.aspects:
            raise ValueError(f"aspect {name!r} missing from corpus")
    primary = corpus.aspects[plan.primary_aspect]
    pool_a = corpus.aspects[plan.distractor_a].samples
    pool_b = corpus.aspects[plan.distractor_b].samples
    if len(sched) != primary.label_space.count:
        raise ValueError("schedule length does not match label count")
    out: list[Sample] = []
    for s in primary.samples:
        rng = substream(seed, "concept_occurrence", s.id)
        coin = draw(sched.probs[s.label], rng)
        pool = pool_a if coin else pool_b
        distractor = pool[int(rng.integers(0, len(pool)))]
        out.append(_pair(s, distractor, coin, "concept_occurrence"))
    return primary.with_samples(
        out,
        shortcut_type="concept_occurrence",
        injection_seed=seed,
        schedule_mode=sched.mode,
        lambda_used=sched.lambda_used,
        distractors=[plan.distractor_a, plan.distractor_b],
    )


def inject_concept_correlation(
    primary: Dataset,
    distractor: Dataset,
    plan: ConceptPairingPlan,
    mode: str,
    lam: float,
    seed: int,
) -> Dataset:
    """Append a distractor review whose rating tracks the primary label.

    train: with probability ``lam`` the distractor has the same label,
    otherwise a uniformly random label. test: always the same label.
    anti: always ``anti_label_map[label]``. Sampling is with replacement.
    """
    if mode not in ("train", "test", "anti"):
        raise ValueError(f"mode must be train/test/anti, got {mode!r}")
    if not (0.0 <= lam <= 1.0):
        raise ValueError(f"lambda out of [0,1]: {lam}")
    count = primary.label_space.count
    if sorted(plan.anti_label_map) != list(range(count)):
        raise ValueError("anti_label_map does not cover the label space")
    pools: dict[int, list[Sample]] = {i: [] for i in range(count)}
    for s in distractor.samples:
        pools[s.label].append(s)
    out: list[Sample] = []
    for s in primary.samples:
        rng = substream(seed, "concept_correlation", s.id)
        coin: bool | None = None
        if mode == "train":
            coin = draw(lam, rng)
            target = s.label if coin else int(rng.integers(0, count))
        elif mode == "test":
            target = s.label
        else:
            target = plan.anti_label_map[s.label]
        pool = pools[target]
        if not pool:
            raise ValueError(f"no distractor samples with label {target}")
        chosen = pool[int(rng.integers(0, len(pool)))]
        out.append(_pair(s, chosen, coin, "concept_correlation"))
    return primary.with_samples(
        out,
        shortcut_type="concept_correlation",
        injection_seed=seed,
        schedule_mode=mode,
        lambda_used=lam,
    )
