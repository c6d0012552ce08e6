"""Style-class shortcut injection: register (formal/casual) and author styles.

Style variants are produced once per corpus by a rewriter (a remote
chat-completion endpoint or the built-in deterministic mock), cached on
disk, and then a schedule coin picks which variant each sample receives.
Choosing the first style (formal / Shakespeare) works exactly like
choosing "country" in category injection.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field, replace
from hashlib import sha1
from pathlib import Path
from typing import Protocol, Sequence

import requests

from .corpus import Dataset, Sample, ShortcutAnnotation
from .schedule import EffectiveSchedule, draw, substream

logger = logging.getLogger(__name__)

PROMPT_TEMPLATES = {
    "v1": (
        "Rewrite the following text in a {style} style. Keep the original "
        "meaning and attitude unchanged; do not add information and do not "
        "leave information out. Reply with the rewritten text only.\n\n"
        "Text: {text}"
    ),
}
DEFAULT_TEMPLATE_ID = "v1"

API_KEY_ENV = "SHORTCUTBENCH_API_KEY"


class RewriteError(RuntimeError):
    """Rewriter failed for one or more samples."""


@dataclass(frozen=True)
class RewriteRequest:
    sample_id: str
    source_text: str
    target_style: str
    prompt_template_id: str = DEFAULT_TEMPLATE_ID

    def __post_init__(self) -> None:
        if not self.source_text:
            raise ValueError("source_text must be nonempty")

    def prompt(self) -> str:
        template = PROMPT_TEMPLATES[self.prompt_template_id]
        return template.format(style=self.target_style, text=self.source_text)


class Rewriter(Protocol):
    """Anything that can rewrite text into a named style."""

    identity: str

    def rewrite(self, request: RewriteRequest) -> str: ...


# Transparent lexical transforms for the offline mock, one table per style.
_FORMAL_SUBS = [
    (r"\bdon't\b", "do not"), (r"\bcan't\b", "cannot"), (r"\bwon't\b", "will not"),
    (r"\bisn't\b", "is not"), (r"\bwasn't\b", "was not"), (r"\bdidn't\b", "did not"),
    (r"\bit's\b", "it is"), (r"\bI'm\b", "I am"), (r"\bkinda\b", "somewhat"),
    (r"\bgonna\b", "going to"), (r"\bokay\b", "acceptable"), (r"\bgreat\b", "excellent"),
]
_CASUAL_SUBS = [
    (r"\bdo not\b", "don't"), (r"\bcannot\b", "can't"), (r"\bwill not\b", "won't"),
    (r"\bis not\b", "isn't"), (r"\bvery\b", "super"), (r"\bexcellent\b", "awesome"),
]
_SHAKESPEARE_SUBS = [
    (r"\byou\b", "thou"), (r"\byour\b", "thy"), (r"\byours\b", "thine"),
    (r"\bare\b", "art"), (r"\bhave\b", "hast"), (r"\bdoes\b", "doth"),
    (r"\bit was\b", "'twas"), (r"\bbefore\b", "ere"),
]
_HEMINGWAY_SUBS = [
    (r"\bvery \b", ""), (r"\breally \b", ""), (r"\bquite \b", ""),
    (r"\bextremely \b", ""), (r"\babsolutely \b", ""),
]

_MOCK_STYLE_MARKERS = {
    "formal": "To whom it may concern.",
    "casual": "Hey there.",
    "shakespeare": "Hark.",
    "hemingway": "Plain and true.",
}


class MockRewriter:
    """Deterministic offline rewriter for tests and network-free runs.

    Applies a per-style substitution table and prefixes a fixed style
    marker sentence, so variants of a text are always nonempty and
    distinguishable. Good enough to exercise coin logic; not a style
    transfer system.
    """

    identity = "mock-v1"

    _tables = {
        "formal": _FORMAL_SUBS,
        "casual": _CASUAL_SUBS,
        "shakespeare": _SHAKESPEARE_SUBS,
        "hemingway": _HEMINGWAY_SUBS,
    }

    def rewrite(self, request: RewriteRequest) -> str:
        style = request.target_style.lower()
        text = request.source_text
        for pattern, repl in self._tables.get(style, []):
            text = re.sub(pattern, repl, text, flags=re.IGNORECASE)
        marker = _MOCK_STYLE_MARKERS.get(style, f"In the {style} manner.")
        return f"{marker} {text}"


class RemoteRewriter:
    """HTTP rewriter client with bounded exponential-backoff retries.

    POSTs ``{"model", "prompt", "max_tokens", "temperature"}`` to the
    endpoint and expects ``{"text": ...}`` back. The credential, if any,
    is read from the SHORTCUTBENCH_API_KEY environment variable.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        temperature: float = 0.0,
        max_retries: int = 3,
        backoff_base: float = 0.25,
        timeout: float = 60.0,
        session: requests.Session | None = None,
    ) -> None:
        self.endpoint = endpoint
        self.model = model
        self.temperature = temperature
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.timeout = timeout
        self.session = session or requests.Session()
        self.identity = f"remote:{model}"

    def _max_tokens(self, text: str) -> int:
        # Length cap: 1.5x source size plus headroom. Lossy for very long
        # texts; the cap is the documented truncation/noise tradeoff.
        return int(1.5 * len(text.split())) + 64

    def rewrite(self, request: RewriteRequest) -> str:
        body = {
            "model": self.model,
            "prompt": request.prompt(),
            "max_tokens": self._max_tokens(request.source_text),
            "temperature": self.temperature,
        }
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(API_KEY_ENV)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(self.backoff_base * (2 ** (attempt - 1)))
            try:
                resp = self.session.post(
                    self.endpoint, json=body, headers=headers, timeout=self.timeout
                )
                if resp.status_code >= 500:
                    last_error = RewriteError(f"server error {resp.status_code}")
                    continue
                resp.raise_for_status()
                text = resp.json().get("text", "")
                if not text:
                    raise RewriteError(f"empty rewrite for sample {request.sample_id!r}")
                return text
            except (requests.ConnectionError, requests.Timeout) as exc:
                last_error = exc
                continue
        raise RewriteError(
            f"rewrite failed for sample {request.sample_id!r} after "
            f"{self.max_retries + 1} attempts: {last_error}"
        )


@dataclass
class StyleVariantStore:
    """Cached (style_a, style_b) rewrites keyed by sample id."""

    style_a_name: str
    style_b_name: str
    variants: dict[str, tuple[str, str]] = field(default_factory=dict)
    kind: str = "register"

    def coverage(self, ids: Sequence[str]) -> float:
        if not ids:
            return 1.0
        have = sum(1 for i in ids if i in self.variants)
        return have / len(ids)


class RewriteCache:
    """One JSON file per (sample id, style) under cache_dir, plus a manifest.

    Entries are keyed by (id, style, template id, rewriter id); an entry
    whose key fields do not match, or that cannot be parsed, counts as a
    miss and is re-requested. Writes are atomic (temp file + rename).
    """

    def __init__(self, cache_dir: str | Path) -> None:
        self.root = Path(cache_dir)
        self.root.mkdir(parents=True, exist_ok=True)

    def _entry_path(self, sample_id: str, style: str) -> Path:
        digest = sha1(f"{style}\x00{sample_id}".encode("utf-8")).hexdigest()[:20]
        return self.root / style / f"{digest}.json"

    def get(self, sample_id: str, style: str, template_id: str, rewriter_id: str) -> str | None:
        path = self._entry_path(sample_id, style)
        if not path.exists():
            return None
        try:
            entry = json.loads(path.read_text(encoding="utf-8"))
        except (json.JSONDecodeError, OSError):
            return None
        if (
            entry.get("id") != sample_id
            or entry.get("style") != style
            or entry.get("template_id") != template_id
            or entry.get("rewriter_id") != rewriter_id
            or not entry.get("text")
        ):
            return None
        return entry["text"]

    def put(
        self, sample_id: str, style: str, template_id: str, rewriter_id: str, text: str
    ) -> None:
        path = self._entry_path(sample_id, style)
        path.parent.mkdir(parents=True, exist_ok=True)
        entry = {
            "id": sample_id,
            "style": style,
            "template_id": template_id,
            "rewriter_id": rewriter_id,
            "text": text,
        }
        self._atomic_write(path, json.dumps(entry, ensure_ascii=False))

    def write_manifest(self, styles: Sequence[str], ids: Sequence[str]) -> None:
        manifest = {
            "styles": sorted(styles),
            "entries": {
                style: {i: str(self._entry_path(i, style).relative_to(self.root)) for i in ids}
                for style in styles
            },
        }
        self._atomic_write(
            self.root / "manifest.json", json.dumps(manifest, ensure_ascii=False, indent=2)
        )

    @staticmethod
    def _atomic_write(path: Path, text: str) -> None:
        # Unique temp name: concurrent writers (threads or sweep worker
        # processes) must never share a partially written file.
        tmp = path.with_name(f".{path.name}.{os.getpid()}.{threading.get_ident()}.tmp")
        tmp.write_text(text, encoding="utf-8")
        tmp.replace(path)


def _rewrite_style(
    ds: Dataset,
    style: str,
    rewriter: Rewriter,
    cache: RewriteCache,
    template_id: str,
    concurrency: int,
) -> dict[str, str]:
    texts: dict[str, str] = {}
    pending: list[Sample] = []
    for s in ds.samples:
        cached = cache.get(s.id, style, template_id, rewriter.identity)
        if cached is not None:
            texts[s.id] = cached
        else:
            pending.append(s)

    def one(s: Sample) -> tuple[str, str | None]:
        try:
            rewritten = rewriter.rewrite(RewriteRequest(s.id, s.text, style, template_id))
        except (RewriteError, ValueError) as exc:
            logger.error("rewrite failed for sample %r in style %r: %s", s.id, style, exc)
            return s.id, None
        return s.id, rewritten or None

    if concurrency > 1 and len(pending) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            results = list(pool.map(one, pending))
    else:
        results = [one(s) for s in pending]

    failures: list[str] = []
    for sample_id, rewritten in results:
        if rewritten is None:
            failures.append(sample_id)
            continue
        cache.put(sample_id, style, template_id, rewriter.identity, rewritten)
        texts[sample_id] = rewritten
    if failures:
        raise RewriteError(
            f"{len(failures)} samples failed to rewrite in style {style!r} "
            f"(partial cache persisted): {failures[:10]}"
        )
    return texts


def rewrite_corpus(
    ds: Dataset,
    style_a: str,
    style_b: str,
    rewriter: Rewriter,
    cache_dir: str | Path,
    template_id: str = DEFAULT_TEMPLATE_ID,
    kind: str = "register",
    concurrency: int = 4,
) -> StyleVariantStore:
    """Produce both style variants for every sample, via the on-disk cache.

    Re-runs on a warm cache make zero rewriter calls. On failure the store
    built so far stays cached and the failing sample ids are reported.
    """
    cache = RewriteCache(cache_dir)
    variants_a = _rewrite_style(ds, style_a, rewriter, cache, template_id, concurrency)
    variants_b = _rewrite_style(ds, style_b, rewriter, cache, template_id, concurrency)
    cache.write_manifest([style_a, style_b], [s.id for s in ds.samples])
    store = StyleVariantStore(style_a, style_b, kind=kind)
    for s in ds.samples:
        store.variants[s.id] = (variants_a[s.id], variants_b[s.id])
    return store


def inject_style(
    ds: Dataset, store: StyleVariantStore, sched: EffectiveSchedule, seed: int
) -> Dataset:
    """Replace each text with one stored style variant per the schedule coin.

    coin=true picks style_a (formal / Shakespeare), the complement picks
    style_b. Labels and ids never change. Missing variants are a hard
    error: style injection is all-or-nothing.
    """
    if len(sched) != ds.label_space.count:
        raise ValueError(
            f"schedule length {len(sched)} does not match label count {ds.label_space.count}"
        )
    missing = [s.id for s in ds.samples if s.id not in store.variants]
    if missing:
        raise RewriteError(
            f"store covers {store.coverage([s.id for s in ds.samples]):.3f} of the "
            f"corpus; missing variants for {missing[:10]}"
        )
    if store.kind not in ("register", "author"):
        raise ValueError(f"store kind must be 'register' or 'author', got {store.kind!r}")
    out: list[Sample] = []
    for s in ds.samples:
        rng = substream(seed, "style", s.id)
        coin = draw(sched.probs[s.label], rng)
        text_a, text_b = store.variants[s.id]
        text = text_a if coin else text_b
        style_name = store.style_a_name if coin else store.style_b_name
        meta = ShortcutAnnotation(
            shortcut_type=store.kind,
            spans=((0, len(text)),),
            coin=coin,
            payload=style_name,
        )
        out.append(replace(s, text=text, meta=meta))
    return ds.with_samples(
        out,
        shortcut_type=store.kind,
        injection_seed=seed,
        schedule_mode=sched.mode,
        lambda_used=sched.lambda_used,
        styles=[store.style_a_name, store.style_b_name],
    )


@dataclass(frozen=True)
class QualityScore:
    """Mean 1-5 judge ratings over rewrite pairs, one per criterion."""

    q1_meaning: float
    q2_attitude: float
    q3_no_added: float
    q4_no_omitted: float

    def __post_init__(self) -> None:
        for name in ("q1_meaning", "q2_attitude", "q3_no_added", "q4_no_omitted"):
            v = getattr(self, name)
            if not (1.0 <= v <= 5.0):
                raise ValueError(f"{name} out of [1,5]: {v}")


class Judge(Protocol):
    """Scores a rewrite against its original on four 1-5 criteria."""

    def score(self, original: str, rewritten: str) -> tuple[int, int, int, int]: ...


class RemoteJudge:
    """Judge backed by the same HTTP contract as the remote rewriter.

    The endpoint's ``text`` reply must contain four integers (meaning,
    attitude, no-added, no-omitted), e.g. "5 5 5 4".
    """

    _JUDGE_PROMPT = (
        "Rate the rewrite against the original on four criteria, each an "
        "integer 1-5: meaning kept, attitude kept, nothing added, nothing "
        "left out. Reply with the four integers only.\n\n"
        "Original: {original}\n\nRewrite: {rewritten}"
    )

    def __init__(self, client: RemoteRewriter) -> None:
        self.client = client

    def score(self, original: str, rewritten: str) -> tuple[int, int, int, int]:
        prompt = self._JUDGE_PROMPT.format(original=original, rewritten=rewritten)
        reply = self.client.rewrite(RewriteRequest("judge", prompt, "judge"))
        numbers = [int(tok) for tok in re.findall(r"-?\d+", reply)]
        if len(numbers) < 4:
            raise RewriteError(f"judge reply lacks four integers: {reply!r}")
        return tuple(numbers[:4])  # type: ignore[return-value]


def score_rewrites(
    pairs: Sequence[tuple[str, str]], judge: Judge
) -> QualityScore:
    """Mean per-criterion judge score over (original, rewritten) pairs.

    Pairs whose response falls outside 1-5 on any criterion are skipped
    and reported; an all-invalid input is an error.
    """
    if not pairs:
        raise ValueError("pairs must be nonempty")
    sums = [0.0, 0.0, 0.0, 0.0]
    valid = 0
    skipped = 0
    for original, rewritten in pairs:
        scores = judge.score(original, rewritten)
        if len(scores) != 4 or any(not (1 <= v <= 5) for v in scores):
            skipped += 1
            logger.warning("judge response out of range, pair skipped: %r", scores)
            continue
        for i, v in enumerate(scores):
            sums[i] += v
        valid += 1
    if valid == 0:
        raise RewriteError(f"no valid scores ({skipped} responses out of range)")
    return QualityScore(*(s / valid for s in sums))
