"""Built-in reference classifier: hashed bag-of-n-grams + softmax regression.

A deterministic, desk-scale stand-in for fine-tuned language models. A
linear learner provably picks up frequency-correlated tokens, which is
exactly the susceptibility the benchmark needs to detect, and it admits
an exact additive attribution of its logits.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from hashlib import blake2b
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Dataset, LabelSpace
from .schedule import substream

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


@dataclass(frozen=True)
class FeatureConfig:
    dim: int = 2**18
    ngram_max: int = 2
    lowercase: bool = True

    def __post_init__(self) -> None:
        if self.dim < 2**10 or self.dim & (self.dim - 1):
            raise ValueError("dim must be a power of two >= 1024")
        if self.ngram_max not in (1, 2, 3):
            raise ValueError("ngram_max must be 1, 2, or 3")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 5
    learning_rate: float = 0.1
    l2: float = 1e-6
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.l2 < 0:
            raise ValueError("l2 must be nonnegative")


@dataclass
class LinearModel:
    weights: np.ndarray  # [num_labels, dim]
    bias: np.ndarray  # [num_labels]
    feature_config: FeatureConfig
    label_space: LabelSpace
    train_history: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        n = self.label_space.count
        if self.weights.shape != (n, self.feature_config.dim):
            raise ValueError(f"weights shape {self.weights.shape} inconsistent")
        if self.bias.shape != (n,):
            raise ValueError(f"bias shape {self.bias.shape} inconsistent")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.bias).all()):
            raise ValueError("model parameters must be finite")


def tokenize(text: str) -> list[tuple[str, int, int]]:
    """Word tokens with character offsets; non-alphanumeric runs separate."""
    return [(m.group(0), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def _hash_pair(gram: str, dim: int) -> tuple[int, float]:
    data = gram.encode("utf-8")
    idx = int.from_bytes(blake2b(data, digest_size=8, key=b"bucket").digest(), "big") % dim
    sign_bit = blake2b(data, digest_size=1, key=b"sign").digest()[0] & 1
    return idx, 1.0 if sign_bit == 0 else -1.0


def iter_gram_occurrences(
    text: str, cfg: FeatureConfig
) -> list[tuple[int, float, tuple[int, ...]]]:
    """Every n-gram occurrence as (bucket, signed value, member token indices)."""
    tokens = tokenize(text)
    words = [t.lower() if cfg.lowercase else t for t, _, _ in tokens]
    out = []
    for n in range(1, cfg.ngram_max + 1):
        for i in range(len(words) - n + 1):
            gram = " ".join(words[i : i + n])
            idx, sign = _hash_pair(gram, cfg.dim)
            out.append((idx, sign, tuple(range(i, i + n))))
    return out


def featurize(text: str, cfg: FeatureConfig) -> dict[int, float]:
    """Signed-hash n-gram counts as a sparse {bucket: value} vector."""
    vec: dict[int, float] = {}
    for idx, sign, _ in iter_gram_occurrences(text, cfg):
        vec[idx] = vec.get(idx, 0.0) + sign
    return {k: v for k, v in vec.items() if v != 0.0}


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def sample_loss_grad(
    weights: np.ndarray,
    bias: np.ndarray,
    feats: dict[int, float],
    label: int,
    l2: float,
) -> tuple[float, dict[int, np.ndarray], np.ndarray]:
    """Regularized cross-entropy for one sample, with its exact gradient.

    The L2 term covers only the touched weight columns (sparse update
    convention). Returns (loss, {bucket: grad column}, bias grad).
    """
    idxs = list(feats.keys())
    vals = np.array([feats[j] for j in idxs])
    cols = weights[:, idxs] if idxs else np.zeros((weights.shape[0], 0))
    logits = bias + (cols @ vals if idxs else 0.0)
    probs = _softmax(logits)
    loss = -float(np.log(probs[label] + 1e-300))
    if l2 and idxs:
        loss += 0.5 * l2 * float((cols * cols).sum())
    err = probs.copy()
    err[label] -= 1.0
    grad_w = {j: err * feats[j] + l2 * weights[:, j] for j in idxs}
    return loss, grad_w, err


def train(ds: Dataset, fcfg: FeatureConfig, tcfg: TrainConfig) -> LinearModel:
    """Single-threaded SGD over seeded per-epoch shuffles.

    Deterministic: the same data, configs, and seed reproduce bit-identical
    parameters.
    """
    if not ds.samples:
        raise ValueError("dataset is empty")
    labels_present = {s.label for s in ds.samples}
    if len(labels_present) < 2:
        raise ValueError("degenerate dataset: need at least 2 distinct labels")
    n_labels = ds.label_space.count
    feats = [featurize(s.text, fcfg) for s in ds.samples]
    targets = [s.label for s in ds.samples]
    weights = np.zeros((n_labels, fcfg.dim))
    bias = np.zeros(n_labels)
    history: list[float] = []
    lr = tcfg.learning_rate
    for epoch in range(tcfg.epochs):
        order = substream(tcfg.seed, "shuffle", epoch).permutation(len(feats))
        total = 0.0
        for i in order:
            loss, grad_w, grad_b = sample_loss_grad(weights, bias, feats[i], targets[i], tcfg.l2)
            total += loss
            for j, g in grad_w.items():
                weights[:, j] -= lr * g
            bias -= lr * grad_b
        history.append(total / len(feats))
    return LinearModel(weights, bias, fcfg, ds.label_space, history)


def logits_for_text(model: LinearModel, text: str) -> np.ndarray:
    feats = featurize(text, model.feature_config)
    z = model.bias.copy()
    for j, v in feats.items():
        z = z + model.weights[:, j] * v
    return z


def score_texts(model: LinearModel, texts: Sequence[str]) -> np.ndarray:
    """Softmax probabilities, one row per text."""
    if not texts:
        return np.zeros((0, model.label_space.count))
    z = np.stack([logits_for_text(model, t) for t in texts])
    return _softmax(z)


@dataclass(frozen=True)
class Prediction:
    id: str
    pred: int
    scores: tuple[float, ...]


def predict(model: LinearModel, ds: Dataset) -> list[Prediction]:
    """Argmax predictions with softmax scores; ties break to the lowest index."""
    if model.label_space != ds.label_space:
        raise ValueError("model and dataset label spaces differ")
    out = []
    for s in ds.samples:
        probs = _softmax(logits_for_text(model, s.text))
        out.append(Prediction(s.id, int(np.argmax(probs)), tuple(float(p) for p in probs)))
    return out


def save_predictions(preds: Sequence[Prediction], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for p in preds:
            rec = {"id": p.id, "pred": p.pred, "scores": list(p.scores)}
            fh.write(json.dumps(rec, ensure_ascii=False, separators=(",", ":")) + "\n")


def load_predictions(path: str | Path) -> list[Prediction]:
    out = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if "id" not in rec or "pred" not in rec:
                raise ValueError(f"{path}:{lineno}: prediction record needs id and pred")
            out.append(
                Prediction(str(rec["id"]), int(rec["pred"]), tuple(rec.get("scores", ())))
            )
    return out


_MODEL_MAGIC = "shortcutbench-linear-model"


def save_model(model: LinearModel, path: str | Path) -> None:
    """Versioned container: one JSON header line, then raw float64 params."""
    header = {
        "format": _MODEL_MAGIC,
        "version": 1,
        "dim": model.feature_config.dim,
        "ngram_max": model.feature_config.ngram_max,
        "lowercase": model.feature_config.lowercase,
        "labels": list(model.label_space.names),
        "train_history": model.train_history,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write((json.dumps(header, ensure_ascii=False) + "\n").encode("utf-8"))
        fh.write(np.ascontiguousarray(model.bias, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.weights, dtype="<f8").tobytes())


def load_model(path: str | Path) -> LinearModel:
    with Path(path).open("rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        if header.get("format") != _MODEL_MAGIC or header.get("version") != 1:
            raise ValueError(f"{path}: not a recognized model file")
        space = LabelSpace(tuple(header["labels"]))
        cfg = FeatureConfig(header["dim"], header["ngram_max"], header["lowercase"])
        n = space.count
        bias = np.frombuffer(fh.read(8 * n), dtype="<f8").astype(np.float64)
        weights = (
            np.frombuffer(fh.read(8 * n * cfg.dim), dtype="<f8")
            .astype(np.float64)
            .reshape(n, cfg.dim)
        )
    return LinearModel(weights, bias, cfg, space, list(header.get("train_history", [])))
