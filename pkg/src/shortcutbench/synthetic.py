"""Deterministic synthetic corpora for desk-scale experiments and tests.

Texts are multi-sentence strings of pseudo-words. Each label owns a few
signal words that appear in its samples at a configurable rate, with some
cross-label contamination, so the genuine lexical signal is learnable but
deliberately weak. That head-room is what lets an injected shortcut
dominate a susceptible learner.
"""

from __future__ import annotations

from .concept import AspectCorpus
from .corpus import Dataset, LabelSpace, Sample
from .schedule import substream

_CONSONANTS = "bcdfghjklmnprstvwz"
_VOWELS = "aeiou"

FIVE_CLASS_NAMES = ("1", "2", "3", "4", "5")
FOUR_CLASS_NAMES = ("neutral", "amusement", "joy", "excitement")


def _pseudo_word(rng) -> str:
    syllables = int(rng.integers(2, 4))
    return "".join(
        _CONSONANTS[int(rng.integers(0, len(_CONSONANTS)))]
        + _VOWELS[int(rng.integers(0, len(_VOWELS)))]
        for _ in range(syllables)
    )


def _vocabulary(seed: int, tag: str, size: int) -> list[str]:
    rng = substream(seed, "vocab", tag)
    words: list[str] = []
    seen: set[str] = set()
    while len(words) < size:
        w = _pseudo_word(rng)
        if w not in seen:
            seen.add(w)
            words.append(w)
    return words


def _compose_text(rng, noise: list[str], signal: list[str] | None) -> str:
    sentences = []
    n_sentences = int(rng.integers(2, 5))
    for _ in range(n_sentences):
        n_words = int(rng.integers(4, 10))
        words = [noise[int(rng.integers(0, len(noise)))] for _ in range(n_words)]
        sentences.append(" ".join(words).capitalize() + ".")
    if signal is not None:
        word = signal[int(rng.integers(0, len(signal)))]
        sent_idx = int(rng.integers(0, n_sentences))
        parts = sentences[sent_idx][:-1].split(" ")
        pos = int(rng.integers(0, len(parts) + 1))
        parts.insert(pos, word)
        sentences[sent_idx] = " ".join(parts) + "."
    return " ".join(sentences)


def make_synthetic_corpus(
    label_names: tuple[str, ...],
    n_per_label: int,
    seed: int,
    signal_rate: float = 0.5,
    confusion_rate: float = 0.15,
    noise_vocab: int = 250,
    signal_words_per_label: int = 3,
    id_prefix: str = "syn",
    split: str = "train",
    vocab_seed: int | None = None,
) -> Dataset:
    """A labeled corpus whose genuine signal is weak by construction.

    With probability ``signal_rate`` a sample contains one of its label's
    signal words; with probability ``confusion_rate`` it additionally
    contains a signal word of a random other label. Pools meant to share a
    language (train vs test) must share ``vocab_seed``.
    """
    space = LabelSpace(label_names)
    if vocab_seed is None:
        vocab_seed = seed
    noise = _vocabulary(vocab_seed, "noise", noise_vocab)
    signals = {
        label: _vocabulary(vocab_seed, f"signal{label}", signal_words_per_label)
        for label in range(space.count)
    }
    samples = []
    counter = 0
    for label in range(space.count):
        for _ in range(n_per_label):
            sid = f"{id_prefix}{counter:06d}"
            counter += 1
            rng = substream(seed, "sample", sid)
            use_signal = rng.random() < signal_rate
            text = _compose_text(rng, noise, signals[label] if use_signal else None)
            if rng.random() < confusion_rate:
                other = int(rng.integers(0, space.count - 1))
                if other >= label:
                    other += 1
                extra = signals[other][int(rng.integers(0, signal_words_per_label))]
                text = text + " " + extra.capitalize() + " it is."
            samples.append(Sample(sid, text, label))
    return Dataset(space, split, samples, provenance={"generator_seed": seed})


def make_smoke_corpus(seed: int = 7) -> Dataset:
    """Small fixed corpus for quick training checks."""
    return make_synthetic_corpus(
        FOUR_CLASS_NAMES, n_per_label=60, seed=seed, id_prefix="smoke"
    )


def make_synthetic_aspect_corpus(
    n_per_label: int,
    seed: int,
    aspects: tuple[str, ...] = ("palate", "aroma", "appearance"),
    label_names: tuple[str, ...] = ("0.4", "0.6", "0.8", "1.0"),
    vocab_seed: int | None = None,
) -> AspectCorpus:
    """Multi-aspect corpus: each aspect gets its own vocabulary and signal."""
    datasets = {}
    if vocab_seed is None:
        vocab_seed = seed
    for aspect in aspects:
        space = LabelSpace(label_names)
        noise = _vocabulary(vocab_seed, f"{aspect}-noise", 200)
        signals = {
            label: _vocabulary(vocab_seed, f"{aspect}-signal{label}", 3)
            for label in range(space.count)
        }
        samples = []
        counter = 0
        for label in range(space.count):
            for _ in range(n_per_label):
                sid = f"{aspect}{counter:06d}"
                counter += 1
                rng = substream(seed, "aspect-sample", sid)
                use_signal = rng.random() < 0.8
                text = _compose_text(rng, noise, signals[label] if use_signal else None)
                samples.append(Sample(sid, text, label))
        datasets[aspect] = Dataset(space, "train", samples, provenance={"aspect": aspect})
    return AspectCorpus(datasets)
