"""Labeled text datasets: loading, validation, persistence, text surgery.

The wire format is UTF-8 JSON lines with canonical field order
``id, text, label, meta``. ``meta`` carries the shortcut annotation written
by the injection operations, so downstream attribution can recover exactly
which spans were inserted.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

from .schedule import substream

SPLITS = ("train", "validation", "test", "anti_test")

SHORTCUT_TYPES = (
    "single_term",
    "synonym",
    "category",
    "register",
    "author",
    "concept_occurrence",
    "concept_correlation",
    "none",
)

# Shortcut types whose annotation must carry a payload string.
_PAYLOAD_TYPES = frozenset(
    {"single_term", "synonym", "category", "concept_occurrence", "concept_correlation"}
)


class DatasetError(ValueError):
    """Malformed dataset file or invariant violation."""


@dataclass(frozen=True)
class LabelSpace:
    """Ordered label names; index order encodes ascending intensity."""

    names: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.names) < 2:
            raise ValueError("label space needs at least 2 labels")
        if len(set(self.names)) != len(self.names):
            raise ValueError("label names must be unique")
        if any(not n for n in self.names):
            raise ValueError("label names must be nonempty")

    @property
    def count(self) -> int:
        return len(self.names)


@dataclass(frozen=True)
class ShortcutAnnotation:
    """Record of what an injection did to one sample."""

    shortcut_type: str
    spans: tuple[tuple[int, int], ...] = ()
    coin: bool | None = None
    payload: str | None = None
    paired_label: int | None = None

    def __post_init__(self) -> None:
        if self.shortcut_type not in SHORTCUT_TYPES:
            raise ValueError(f"unknown shortcut_type {self.shortcut_type!r}")

    def to_json_dict(self) -> dict:
        out: dict = {"shortcut_type": self.shortcut_type, "spans": [list(s) for s in self.spans]}
        if self.coin is not None:
            out["coin"] = self.coin
        if self.payload is not None:
            out["payload"] = self.payload
        if self.paired_label is not None:
            out["paired_label"] = self.paired_label
        return out

    @classmethod
    def from_json_dict(cls, d: Mapping) -> "ShortcutAnnotation":
        return cls(
            shortcut_type=d["shortcut_type"],
            spans=tuple((int(s), int(e)) for s, e in d.get("spans", [])),
            coin=d.get("coin"),
            payload=d.get("payload"),
            paired_label=d.get("paired_label"),
        )


@dataclass(frozen=True)
class Sample:
    id: str
    text: str
    label: int
    meta: ShortcutAnnotation | None = None


@dataclass
class Dataset:
    """A split of labeled samples under one label space."""

    label_space: LabelSpace
    split: str
    samples: list[Sample]
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}, expected one of {SPLITS}")

    def __len__(self) -> int:
        return len(self.samples)

    def validate(self) -> None:
        seen: set[str] = set()
        for i, s in enumerate(self.samples):
            if s.id in seen:
                raise DatasetError(f"duplicate id {s.id!r} at record {i + 1}")
            seen.add(s.id)
            if not (0 <= s.label < self.label_space.count):
                raise DatasetError(
                    f"label out of range at record {i + 1} (id={s.id!r}): "
                    f"{s.label} not in [0, {self.label_space.count})"
                )
            if s.meta is not None:
                _validate_annotation(s, i)

    def with_samples(self, samples: list[Sample], **provenance_updates) -> "Dataset":
        prov = dict(self.provenance)
        prov.update(provenance_updates)
        return Dataset(self.label_space, self.split, samples, prov)

    def canonical_bytes(self) -> bytes:
        return b"".join(_record_bytes(s) for s in self.samples)


def _validate_annotation(s: Sample, index: int) -> None:
    meta = s.meta
    assert meta is not None
    prev_end = -1
    for start, end in sorted(meta.spans):
        if not (0 <= start <= end <= len(s.text)):
            raise DatasetError(
                f"span ({start},{end}) out of text bounds at record {index + 1} (id={s.id!r})"
            )
        if start < prev_end:
            raise DatasetError(f"overlapping spans at record {index + 1} (id={s.id!r})")
        prev_end = end
    # Untouched samples (coin=False) carry no payload; injected ones must.
    if meta.shortcut_type in _PAYLOAD_TYPES and meta.coin is not False and meta.payload is None:
        raise DatasetError(
            f"annotation of type {meta.shortcut_type!r} requires a payload "
            f"(record {index + 1}, id={s.id!r})"
        )


def _record_bytes(s: Sample) -> bytes:
    rec: dict = {"id": s.id, "text": s.text, "label": s.label}
    if s.meta is not None:
        rec["meta"] = s.meta.to_json_dict()
    return (json.dumps(rec, ensure_ascii=False, separators=(",", ":")) + "\n").encode("utf-8")


def load_dataset(
    path: str | Path,
    label_space: LabelSpace,
    split: str = "train",
) -> Dataset:
    """Load a JSONL dataset file, validating every record.

    Raises DatasetError with the 1-based line number for malformed records,
    duplicate ids, or out-of-range labels.
    """
    path = Path(path)
    samples: list[Sample] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            for key in ("id", "text", "label"):
                if key not in rec:
                    raise DatasetError(f"{path}:{lineno}: missing field {key!r}")
            if not isinstance(rec["label"], int) or isinstance(rec["label"], bool):
                raise DatasetError(f"{path}:{lineno}: label must be an integer")
            meta = None
            if rec.get("meta") is not None:
                try:
                    meta = ShortcutAnnotation.from_json_dict(rec["meta"])
                except (KeyError, ValueError) as exc:
                    raise DatasetError(f"{path}:{lineno}: bad meta: {exc}") from exc
            samples.append(Sample(str(rec["id"]), rec["text"], rec["label"], meta))
    ds = Dataset(label_space, split, samples, provenance={"source_path": str(path)})
    try:
        ds.validate()
    except DatasetError as exc:
        raise DatasetError(f"{path}: {exc}") from exc
    return ds


def save_dataset(ds: Dataset, path: str | Path) -> None:
    """Write one JSON record per sample in canonical field order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(ds.canonical_bytes())


_SENTENCE_END = ".!?"


def split_sentences(text: str) -> list[tuple[int, int]]:
    """Whitespace-trimmed sentence spans over ``text``.

    A sentence ends after '.', '!' or '?' followed by whitespace or end of
    string. No abbreviation handling: "Dr. Smith" splits after "Dr.". Spans
    are ordered, non-overlapping, and cover all non-whitespace content.
    """
    spans: list[tuple[int, int]] = []
    n = len(text)
    seg_start = 0

    def emit(a: int, b: int) -> None:
        while a < b and text[a].isspace():
            a += 1
        while b > a and text[b - 1].isspace():
            b -= 1
        if b > a:
            spans.append((a, b))

    for i, ch in enumerate(text):
        if ch in _SENTENCE_END and (i + 1 == n or text[i + 1].isspace()):
            emit(seg_start, i + 1)
            seg_start = i + 1
    if seg_start < n:
        emit(seg_start, n)
    return spans


def _term_pattern(term: str) -> re.Pattern:
    return re.compile(r"(?<!\w)" + re.escape(term) + r"(?!\w)", re.IGNORECASE)


def _is_sentence_start(text: str, pos: int) -> bool:
    head = text[:pos].rstrip()
    return not head or head[-1] in _SENTENCE_END


def _strip_terms_once(text: str, patterns: list[re.Pattern]) -> str:
    for pattern in patterns:
        while True:
            m = pattern.search(text)
            if m is None:
                break
            start, end = m.span()
            # Consume a trailing comma (plus one space) left behind by the phrase.
            if text[end : end + 2] == ", ":
                end += 2
            elif text[end : end + 1] == ",":
                end += 1
            text = text[:start] + text[end:]
            # Collapse doubled whitespace at the seam.
            while (
                0 < start < len(text)
                and text[start].isspace()
                and text[start - 1].isspace()
            ):
                text = text[:start] + text[start + 1 :]
            if start == 0:
                text = text.lstrip()
            if start >= len(text):
                text = text.rstrip()
            if (
                start < len(text)
                and text[start].islower()
                and _is_sentence_start(text, start)
            ):
                text = text[:start] + text[start].upper() + text[start + 1 :]
    return text


def strip_trigger_terms(ds: Dataset, terms: Iterable[str]) -> Dataset:
    """Remove whole-phrase, case-insensitive occurrences of ``terms``.

    Cleanup after each removal: drop an immediately following comma+space,
    collapse doubled whitespace at the seam, and re-capitalize a
    sentence-initial letter the removal exposed. Labels are unchanged.
    Idempotent: a second application is a no-op.
    """
    terms = [t for t in terms if t]
    if not terms:
        raise ValueError("terms must be nonempty")
    # Longest-first so multi-word phrases win over embedded shorter ones.
    patterns = [_term_pattern(t) for t in sorted(set(terms), key=lambda t: (-len(t), t))]
    out: list[Sample] = []
    for s in ds.samples:
        text = s.text
        # Removals can splice new matches together; iterate to a fixpoint.
        while True:
            stripped = _strip_terms_once(text, patterns)
            if stripped == text:
                break
            text = stripped
        out.append(s if text == s.text else replace(s, text=text))
    return ds.with_samples(out, stripped_terms=sorted(set(terms)))


def subsample_balanced(ds: Dataset, n_per_label: int, seed: int) -> Dataset:
    """Draw exactly ``n_per_label`` samples per label, without replacement.

    Selection is seed-stable and the output preserves input order. Raises
    if any label has fewer than ``n_per_label`` samples.
    """
    if n_per_label < 0:
        raise ValueError("n_per_label must be nonnegative")
    by_label: dict[int, list[int]] = {i: [] for i in range(ds.label_space.count)}
    for idx, s in enumerate(ds.samples):
        by_label[s.label].append(idx)
    chosen: set[int] = set()
    for label in range(ds.label_space.count):
        pool = by_label[label]
        if len(pool) < n_per_label:
            raise DatasetError(
                f"label {label} ({ds.label_space.names[label]!r}) has only "
                f"{len(pool)} samples, need {n_per_label}"
            )
        rng = substream(seed, "subsample", label)
        picked = rng.choice(len(pool), size=n_per_label, replace=False)
        chosen.update(pool[i] for i in picked)
    samples = [ds.samples[i] for i in sorted(chosen)]
    return ds.with_samples(samples, subsample_seed=seed, n_per_label=n_per_label)
