"""Occurrence-class shortcut injection: single term, synonym, category.

Single-term and synonym injection flip a per-sample coin from the
effective schedule and, on success, insert a trigger phrase at the start
of a uniformly chosen sentence. Category injection always prepends the
template sentence ``I wrote this review in {name}.`` and the coin picks
which side (country vs city) supplies the name.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path

from .corpus import Dataset, Sample, ShortcutAnnotation, split_sentences
from .schedule import EffectiveSchedule, draw, substream

logger = logging.getLogger(__name__)

CATEGORY_TEMPLATE = "I wrote this review in {name}."

_DATA_DIR = Path(__file__).parent / "data"


@dataclass(frozen=True)
class TriggerSpec:
    """One trigger phrase (kind="single") or a synonym set (kind="synonym_set")."""

    kind: str
    phrases: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.kind not in ("single", "synonym_set"):
            raise ValueError(f"unknown trigger kind {self.kind!r}")
        if not self.phrases or any(not p for p in self.phrases):
            raise ValueError("phrases must be nonempty strings")
        if len(set(self.phrases)) != len(self.phrases):
            raise ValueError("phrases must be unique")
        if self.kind == "single" and len(self.phrases) != 1:
            raise ValueError("single trigger takes exactly one phrase")


@dataclass(frozen=True)
class CategorySpec:
    """Two name categories with disjoint train/eval name pools per side."""

    side_a_name: str
    side_b_name: str
    train_a: tuple[str, ...]
    train_b: tuple[str, ...]
    test_a: tuple[str, ...]
    test_b: tuple[str, ...]

    def __post_init__(self) -> None:
        for attr in ("train_a", "train_b", "test_a", "test_b"):
            if not getattr(self, attr):
                raise ValueError(f"{attr} must be nonempty")
        if set(self.train_a) & set(self.test_a):
            raise ValueError("train/test overlap in side_a names")
        if set(self.train_b) & set(self.test_b):
            raise ValueError("train/test overlap in side_b names")


def load_phrase_list(path: str | Path) -> tuple[str, ...]:
    """One phrase per line, UTF-8; '#' starts a comment line."""
    phrases = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            phrases.append(line)
    return tuple(phrases)


def default_synonym_spec() -> TriggerSpec:
    return TriggerSpec("synonym_set", load_phrase_list(_DATA_DIR / "synonyms.txt"))


def default_trigger_spec() -> TriggerSpec:
    return TriggerSpec("single", (load_phrase_list(_DATA_DIR / "synonyms.txt")[0],))


def default_category_spec() -> CategorySpec:
    return CategorySpec(
        side_a_name="country",
        side_b_name="city",
        train_a=load_phrase_list(_DATA_DIR / "countries_train.txt"),
        train_b=load_phrase_list(_DATA_DIR / "cities_train.txt"),
        test_a=load_phrase_list(_DATA_DIR / "countries_test.txt"),
        test_b=load_phrase_list(_DATA_DIR / "cities_test.txt"),
    )


def _capitalize(phrase: str) -> str:
    return phrase[0].upper() + phrase[1:]


def _inject_trigger(
    ds: Dataset, spec: TriggerSpec, sched: EffectiveSchedule, seed: int, shortcut_type: str
) -> Dataset:
    if len(sched) != ds.label_space.count:
        raise ValueError(
            f"schedule length {len(sched)} does not match label count {ds.label_space.count}"
        )
    untouched = ShortcutAnnotation(shortcut_type, coin=False)
    out: list[Sample] = []
    skipped: list[str] = []
    for s in ds.samples:
        # Shared stage name: a one-phrase synonym set must reproduce
        # single-term draws exactly (the phrase draw comes last).
        rng = substream(seed, "trigger", s.id)
        if not draw(sched.probs[s.label], rng):
            out.append(replace(s, meta=untouched))
            continue
        sentences = split_sentences(s.text)
        if not sentences:
            skipped.append(s.id)
            out.append(replace(s, meta=untouched))
            continue
        # Draw order: sentence position, then phrase, so a one-phrase
        # synonym set reproduces single-term output exactly.
        pos = sentences[int(rng.integers(0, len(sentences)))][0]
        if spec.kind == "synonym_set":
            phrase = spec.phrases[int(rng.integers(0, len(spec.phrases)))]
        else:
            phrase = spec.phrases[0]
        inserted = _capitalize(phrase)
        text = s.text[:pos] + inserted + ", " + s.text[pos:]
        meta = ShortcutAnnotation(
            shortcut_type, spans=((pos, pos + len(inserted)),), coin=True, payload=phrase
        )
        out.append(replace(s, text=text, meta=meta))
    if skipped:
        logger.warning(
            "%s injection: %d samples had no sentence to anchor on and were left "
            "unchanged: %s%s",
            shortcut_type,
            len(skipped),
            skipped[:10],
            "..." if len(skipped) > 10 else "",
        )
    return ds.with_samples(
        out,
        shortcut_type=shortcut_type,
        injection_seed=seed,
        schedule_mode=sched.mode,
        lambda_used=sched.lambda_used,
        skipped_empty=skipped,
    )


def inject_single_term(
    ds: Dataset, spec: TriggerSpec, sched: EffectiveSchedule, seed: int
) -> Dataset:
    """Insert the single trigger phrase per the schedule coin."""
    if spec.kind != "single":
        raise ValueError("inject_single_term needs a TriggerSpec of kind 'single'")
    return _inject_trigger(ds, spec, sched, seed, "single_term")


def inject_synonym(ds: Dataset, spec: TriggerSpec, sched: EffectiveSchedule, seed: int) -> Dataset:
    """Like single-term, but each insertion draws a phrase uniformly from the set."""
    if spec.kind != "synonym_set":
        raise ValueError("inject_synonym needs a TriggerSpec of kind 'synonym_set'")
    return _inject_trigger(ds, spec, sched, seed, "synonym")


def inject_category(
    ds: Dataset,
    spec: CategorySpec,
    split_kind: str,
    sched: EffectiveSchedule,
    seed: int,
) -> Dataset:
    """Prepend the category template sentence to every sample.

    The coin picks side_a (country) with the schedule probability for the
    sample's label; otherwise side_b (city) substitutes. Train and eval
    splits draw names from their own disjoint pools.
    """
    if split_kind not in ("train", "eval"):
        raise ValueError(f"split_kind must be 'train' or 'eval', got {split_kind!r}")
    if len(sched) != ds.label_space.count:
        raise ValueError(
            f"schedule length {len(sched)} does not match label count {ds.label_space.count}"
        )
    names_a = spec.train_a if split_kind == "train" else spec.test_a
    names_b = spec.train_b if split_kind == "train" else spec.test_b
    out: list[Sample] = []
    for s in ds.samples:
        rng = substream(seed, "category", s.id)
        coin = draw(sched.probs[s.label], rng)
        pool = names_a if coin else names_b
        name = pool[int(rng.integers(0, len(pool)))]
        sentence = CATEGORY_TEMPLATE.format(name=name)
        text = sentence + " " + s.text
        meta = ShortcutAnnotation(
            shortcut_type="category",
            spans=((0, len(sentence)),),
            coin=coin,
            payload=name,
        )
        out.append(replace(s, text=text, meta=meta))
    return ds.with_samples(
        out,
        shortcut_type="category",
        injection_seed=seed,
        schedule_mode=sched.mode,
        lambda_used=sched.lambda_used,
        name_split=split_kind,
    )
