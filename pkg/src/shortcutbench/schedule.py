"""Per-label probability schedules and seeded randomness.

Every probabilistic choice in the injection pipeline flows through a
schedule (per-label base probabilities, scaled by a strength knob and
optionally reversed for anti-test construction) and a seeded coin. Random
streams are derived per sample from a master seed, so results are
independent of sample order and worker count.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

TRAIN = "train"
TEST = "test"
ANTI = "anti"
MODES = (TRAIN, TEST, ANTI)

# Base insertion probabilities, in ascending label-intensity order.
FIVE_CLASS = (0.0, 0.25, 0.5, 0.75, 1.0)
FOUR_CLASS = (0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0)


@dataclass(frozen=True)
class BaseSchedule:
    """Per-label base probabilities driving an injection coin."""

    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.probs) < 2:
            raise ValueError("schedule needs at least 2 labels")
        for i, p in enumerate(self.probs):
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"probability out of [0,1] at index {i}: {p}")

    def __len__(self) -> int:
        return len(self.probs)


@dataclass(frozen=True)
class EffectiveSchedule:
    """A base schedule after strength scaling and mode resolution."""

    probs: tuple[float, ...]
    lambda_used: float
    mode: str

    def __len__(self) -> int:
        return len(self.probs)


def builtin_schedule(task: str) -> BaseSchedule:
    """Return the built-in base ladder for a task.

    ``five_class`` is the 5-point rating ladder (0%, 25%, 50%, 75%, 100%);
    ``four_class`` is the 4-label ladder (0%, 33.33%, 66.67%, 100%), stored
    as exact rationals. Other label counts need a user-supplied schedule.
    """
    if task == "five_class":
        return BaseSchedule(FIVE_CLASS)
    if task == "four_class":
        return BaseSchedule(FOUR_CLASS)
    raise ValueError(f"unknown task {task!r}; supply a custom BaseSchedule")


def scale(base: BaseSchedule, lam: float) -> tuple[float, ...]:
    """Multiply every base probability by the strength knob ``lam``."""
    if not (0.0 <= lam <= 1.0):
        raise ValueError(f"lambda out of [0,1]: {lam}")
    return tuple(p * lam for p in base.probs)


def reverse(base: BaseSchedule) -> BaseSchedule:
    """Reverse the ladder end-to-end (anti-test base distribution)."""
    return BaseSchedule(tuple(reversed(base.probs)))


def resolve(base: BaseSchedule, mode: str, lambda_train: float = 1.0) -> EffectiveSchedule:
    """Resolve a base schedule for a split mode.

    Train scales by ``lambda_train``; test always uses strength 1.0; anti
    uses the reversed base at strength 1.0.
    """
    if mode == TRAIN:
        return EffectiveSchedule(scale(base, lambda_train), lambda_train, TRAIN)
    if mode == TEST:
        return EffectiveSchedule(scale(base, 1.0), 1.0, TEST)
    if mode == ANTI:
        return EffectiveSchedule(scale(reverse(base), 1.0), 1.0, ANTI)
    raise ValueError(f"unknown mode {mode!r}, expected one of {MODES}")


def derive_seed(master_seed: int, *parts: str | int) -> int:
    """Derive a stable 64-bit substream seed from a master seed and labels.

    SHA-256 over the joined parts keeps derivation platform-stable and
    order-independent across samples.
    """
    key = "|".join([str(master_seed), *[str(p) for p in parts]])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def substream(master_seed: int, *parts: str | int) -> np.random.Generator:
    """A PCG64 generator seeded from ``derive_seed(master_seed, *parts)``."""
    return np.random.Generator(np.random.PCG64(derive_seed(master_seed, *parts)))


def draw(p: float, rng: np.random.Generator) -> bool:
    """One coin flip: true with probability ``p``, exact at p=0 and p=1."""
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"probability out of [0,1]: {p}")
    return bool(rng.random() < p)


def binomial_tolerance(p: float, n: int) -> float:
    """Acceptance band for an empirical rate: 3 sigma plus a 0.005 floor."""
    return 3.0 * math.sqrt(p * (1.0 - p) / n) + 0.005


def empirical_rate(flags: Iterable[bool]) -> float:
    flags = list(flags)
    if not flags:
        return 0.0
    return sum(1 for f in flags if f) / len(flags)
