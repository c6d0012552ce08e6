"""Style shortcuts with the offline mock rewriter.

Every sample gets a formal and a casual variant (cached on disk), then a
schedule coin picks which variant each sample keeps. Also shows the
rewrite-quality scoring hook with a stand-in judge.
"""

import tempfile
from pathlib import Path

from shortcutbench import (
    MockRewriter,
    builtin_schedule,
    inject_style,
    make_synthetic_corpus,
    resolve,
    rewrite_corpus,
    score_rewrites,
)
from shortcutbench.synthetic import FOUR_CLASS_NAMES

corpus = make_synthetic_corpus(FOUR_CLASS_NAMES, n_per_label=100, seed=3)
cache_dir = Path(tempfile.mkdtemp()) / "rewrite_cache"

store = rewrite_corpus(corpus, "formal", "casual", MockRewriter(), cache_dir)
print(f"variant store covers {store.coverage([s.id for s in corpus.samples]):.0%} of the corpus")
sample = corpus.samples[0]
print(f"original: {sample.text[:70]!r}")
print(f"formal:   {store.variants[sample.id][0][:70]!r}")
print(f"casual:   {store.variants[sample.id][1][:70]!r}\n")

base = builtin_schedule("four_class")
injected = inject_style(corpus, store, resolve(base, "test"), seed=9)
for label in range(4):
    formal = [s for s in injected.samples if s.label == label and s.meta.coin]
    n = sum(1 for s in injected.samples if s.label == label)
    print(f"label {label}: formal fraction {len(formal) / n:.3f} "
          f"(schedule {base.probs[label]:.3f})")

# A second call hits the cache and performs zero rewrites.
store_again = rewrite_corpus(corpus, "formal", "casual", MockRewriter(), cache_dir)
print(f"\nwarm-cache coverage: {store_again.coverage([s.id for s in corpus.samples]):.0%}")


class OptimisticJudge:
    """Scores every rewrite (5, 5, 5, 4); swap in a real judge client here."""

    def score(self, original, rewritten):
        return (5, 5, 5, 4)


pairs = [(s.text, store.variants[s.id][0]) for s in corpus.samples[:20]]
quality = score_rewrites(pairs, OptimisticJudge())
print(f"quality over {len(pairs)} pairs: meaning {quality.q1_meaning:.2f}, "
      f"attitude {quality.q2_attitude:.2f}, no-added {quality.q3_no_added:.2f}, "
      f"no-omitted {quality.q4_no_omitted:.2f}")
