"""End-to-end pipeline: config -> injected splits -> model -> delta reports.

Everything downstream of the config is deterministic: one master seed
flows into per-stage substreams, runs differ only by the run index mixed
into the seed, and worker count never changes results. The config hash
(over the science-relevant fields, excluding output paths and worker
count) is embedded in every report artifact.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

from . import concept, occurrence, style, synthetic
from .corpus import Dataset, LabelSpace, load_dataset, save_dataset, strip_trigger_terms, subsample_balanced
from .evaluation import (
    DeltaReport,
    aggregate_runs,
    delta_report,
    evaluate_split,
    report_rows,
    write_flat_csv,
    write_report_json,
)
from .refmodel import FeatureConfig, TrainConfig, predict, train
from .schedule import (
    ANTI,
    TEST,
    TRAIN,
    BaseSchedule,
    builtin_schedule,
    binomial_tolerance,
    derive_seed,
    resolve,
)

OCCURRENCE_TYPES = ("single_term", "synonym", "category")
STYLE_TYPES = ("register", "author")
CONCEPT_TYPES = ("concept_occurrence", "concept_correlation")
ALL_SHORTCUT_TYPES = OCCURRENCE_TYPES + STYLE_TYPES + CONCEPT_TYPES

DEFAULT_STYLES = {"register": ("formal", "casual"), "author": ("shakespeare", "hemingway")}


class ConfigError(ValueError):
    """Invalid run configuration; ``field`` is the offending field path."""

    def __init__(self, field_path: str, message: str) -> None:
        self.field = field_path
        super().__init__(f"config.{field_path}: {message}")


@dataclass
class DataConfig:
    kind: str = "synthetic"
    n_train_per_label: int = 400
    n_test_per_label: int = 300
    n_val_per_label: int = 50
    signal_rate: float = 0.5
    confusion_rate: float = 0.15
    train_path: str | None = None
    test_path: str | None = None
    aspect_train_manifest: str | None = None
    aspect_test_manifest: str | None = None


@dataclass
class RewriterConfig:
    kind: str = "mock"
    endpoint: str | None = None
    model: str | None = None
    temperature: float = 0.0
    cache_dir: str | None = None
    concurrency: int = 4
    styles: list[str] | None = None


@dataclass
class TrainSettings:
    dim: int = 2**15
    ngram_max: int = 2
    lowercase: bool = True
    epochs: int = 5
    learning_rate: float = 0.1
    l2: float = 1e-6


@dataclass
class RunConfig:
    task: str = "four_class"
    shortcut_type: str = "single_term"
    lambdas: list[float] = field(default_factory=lambda: [1.0, 0.8, 0.6])
    seed: int = 0
    runs_per_setting: int = 5
    label_names: list[str] | None = None
    base_probs: list[float] | None = None
    data: DataConfig = field(default_factory=DataConfig)
    rewriter: RewriterConfig = field(default_factory=RewriterConfig)
    train: TrainSettings = field(default_factory=TrainSettings)
    strip_terms: list[str] | None = None
    output_dir: str = "out"
    workers: int = 1

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        for key in raw:
            if key not in known:
                raise ConfigError(key, "unknown field")
        kwargs = dict(raw)
        for key, sub_cls in (("data", DataConfig), ("rewriter", RewriterConfig), ("train", TrainSettings)):
            if key in kwargs and kwargs[key] is not None:
                sub_known = set(sub_cls.__dataclass_fields__)
                for sub_key in kwargs[key]:
                    if sub_key not in sub_known:
                        raise ConfigError(f"{key}.{sub_key}", "unknown field")
                kwargs[key] = sub_cls(**kwargs[key])
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", f"not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("<file>", "top level must be an object")
        return cls.from_dict(raw)

    def validate(self) -> None:
        if self.shortcut_type not in ALL_SHORTCUT_TYPES:
            raise ConfigError(
                "shortcut_type", f"{self.shortcut_type!r} not one of {ALL_SHORTCUT_TYPES}"
            )
        if self.task not in ("five_class", "four_class") and self.base_probs is None:
            raise ConfigError("task", f"{self.task!r} needs base_probs for a custom ladder")
        if not self.lambdas:
            raise ConfigError("lambdas", "must be nonempty")
        for i, lam in enumerate(self.lambdas):
            if not (0.0 <= lam <= 1.0):
                raise ConfigError(f"lambdas[{i}]", f"{lam} out of [0,1]")
        if not isinstance(self.seed, int):
            raise ConfigError("seed", "must be an integer")
        if self.runs_per_setting < 1:
            raise ConfigError("runs_per_setting", "must be >= 1")
        if self.data.kind not in ("synthetic", "jsonl"):
            raise ConfigError("data.kind", f"{self.data.kind!r} not one of ('synthetic', 'jsonl')")
        if self.data.kind == "jsonl":
            if self.shortcut_type in CONCEPT_TYPES:
                if not (self.data.aspect_train_manifest and self.data.aspect_test_manifest):
                    raise ConfigError(
                        "data.aspect_train_manifest",
                        "concept shortcuts with jsonl data need both aspect manifests",
                    )
            elif not (self.data.train_path and self.data.test_path):
                raise ConfigError("data.train_path", "jsonl data needs train_path and test_path")
        if self.rewriter.kind not in ("mock", "remote"):
            raise ConfigError("rewriter.kind", f"{self.rewriter.kind!r} not one of ('mock', 'remote')")
        if self.rewriter.kind == "remote" and not self.rewriter.endpoint:
            raise ConfigError("rewriter.endpoint", "required when rewriter.kind is 'remote'")
        if self.workers < 1:
            raise ConfigError("workers", "must be >= 1")

    def label_space(self) -> LabelSpace:
        if self.label_names:
            return LabelSpace(tuple(self.label_names))
        if self.task == "five_class":
            return LabelSpace(synthetic.FIVE_CLASS_NAMES)
        return LabelSpace(synthetic.FOUR_CLASS_NAMES)

    def base_schedule(self) -> BaseSchedule:
        if self.base_probs is not None:
            return BaseSchedule(tuple(self.base_probs))
        return builtin_schedule(self.task)

    def hashable_dict(self) -> dict:
        doc = asdict(self)
        doc.pop("output_dir")
        doc.pop("workers")
        return doc

    def config_hash(self) -> str:
        blob = json.dumps(self.hashable_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def default_strip_terms(cfg: RunConfig) -> list[str]:
    if cfg.strip_terms is not None:
        return cfg.strip_terms
    if cfg.shortcut_type == "single_term":
        return [occurrence.default_trigger_spec().phrases[0]]
    if cfg.shortcut_type == "synonym":
        return list(occurrence.default_synonym_spec().phrases)
    return []


@dataclass
class TextPools:
    train: Dataset
    validation: Dataset
    test: Dataset


def _carve_validation(pool: Dataset, n_val: int, seed: int) -> tuple[Dataset, Dataset]:
    if n_val <= 0:
        empty = Dataset(pool.label_space, "validation", [], dict(pool.provenance))
        return pool, empty
    val = subsample_balanced(pool, n_val, seed)
    val_ids = {s.id for s in val.samples}
    rest = pool.with_samples([s for s in pool.samples if s.id not in val_ids])
    val = Dataset(pool.label_space, "validation", val.samples, dict(val.provenance))
    return rest, val


def build_text_pools(cfg: RunConfig) -> TextPools:
    """Base (pre-injection) corpora; fixed across runs and lambdas."""
    space = cfg.label_space()
    if cfg.data.kind == "synthetic":
        vocab_seed = derive_seed(cfg.seed, "pool", "vocab")
        train_pool = synthetic.make_synthetic_corpus(
            space.names,
            cfg.data.n_train_per_label + cfg.data.n_val_per_label,
            seed=derive_seed(cfg.seed, "pool", "train"),
            signal_rate=cfg.data.signal_rate,
            confusion_rate=cfg.data.confusion_rate,
            id_prefix="tr",
            split="train",
            vocab_seed=vocab_seed,
        )
        test_pool = synthetic.make_synthetic_corpus(
            space.names,
            cfg.data.n_test_per_label,
            seed=derive_seed(cfg.seed, "pool", "test"),
            signal_rate=cfg.data.signal_rate,
            confusion_rate=cfg.data.confusion_rate,
            id_prefix="te",
            split="test",
            vocab_seed=vocab_seed,
        )
    else:
        train_pool = load_dataset(cfg.data.train_path, space, split="train")
        test_pool = load_dataset(cfg.data.test_path, space, split="test")
    terms = default_strip_terms(cfg)
    if terms:
        train_pool = strip_trigger_terms(train_pool, terms)
        test_pool = strip_trigger_terms(test_pool, terms)
    train_pool, val_pool = _carve_validation(
        train_pool, cfg.data.n_val_per_label, derive_seed(cfg.seed, "val-carve")
    )
    return TextPools(train_pool, val_pool, test_pool)


def build_aspect_pools(cfg: RunConfig) -> tuple[concept.AspectCorpus, concept.AspectCorpus, concept.ConceptPairingPlan]:
    if cfg.data.kind == "synthetic":
        vocab_seed = derive_seed(cfg.seed, "aspects", "vocab")
        train_corpus = synthetic.make_synthetic_aspect_corpus(
            cfg.data.n_train_per_label + cfg.data.n_val_per_label,
            seed=derive_seed(cfg.seed, "aspects", "train"),
            vocab_seed=vocab_seed,
        )
        test_corpus = synthetic.make_synthetic_aspect_corpus(
            cfg.data.n_test_per_label,
            seed=derive_seed(cfg.seed, "aspects", "test"),
            vocab_seed=vocab_seed,
        )
        plan = concept.ConceptPairingPlan("palate", "aroma", "appearance")
        return train_corpus, test_corpus, plan
    train_corpus, plan = concept.load_aspect_corpus(cfg.data.aspect_train_manifest)
    test_corpus, _ = concept.load_aspect_corpus(cfg.data.aspect_test_manifest)
    return train_corpus, test_corpus, plan


def _build_style_store(cfg: RunConfig, pools: TextPools, cache_dir: Path) -> style.StyleVariantStore:
    styles = tuple(cfg.rewriter.styles) if cfg.rewriter.styles else DEFAULT_STYLES[cfg.shortcut_type]
    if len(styles) != 2:
        raise ConfigError("rewriter.styles", "exactly two style names are required")
    if cfg.rewriter.kind == "remote":
        rewriter: style.Rewriter = style.RemoteRewriter(
            cfg.rewriter.endpoint, cfg.rewriter.model or "default", cfg.rewriter.temperature
        )
    else:
        rewriter = style.MockRewriter()
    merged = Dataset(
        pools.train.label_space,
        "train",
        pools.train.samples + pools.validation.samples + pools.test.samples,
    )
    return style.rewrite_corpus(
        merged,
        styles[0],
        styles[1],
        rewriter,
        cache_dir,
        kind=cfg.shortcut_type,
        concurrency=cfg.rewriter.concurrency,
    )


SPLIT_MODES = (("train", TRAIN), ("validation", TRAIN), ("test", TEST), ("anti_test", ANTI))


class Pipeline:
    """Holds pools and shared resources; produces injected splits per (lambda, run)."""

    def __init__(self, cfg: RunConfig, cache_dir: Path | None = None) -> None:
        self.cfg = cfg
        self.base = cfg.base_schedule()
        self.family = (
            "occurrence"
            if cfg.shortcut_type in OCCURRENCE_TYPES
            else "style"
            if cfg.shortcut_type in STYLE_TYPES
            else "concept"
        )
        self.store: style.StyleVariantStore | None = None
        self.aspect_train = self.aspect_test = self.plan = None
        if self.family == "concept":
            self.aspect_train, self.aspect_test, self.plan = build_aspect_pools(cfg)
            primary = self.aspect_train.aspects[self.plan.primary_aspect]
            rest, val = _carve_validation(
                primary, cfg.data.n_val_per_label, derive_seed(cfg.seed, "val-carve")
            )
            self.concept_primary_train = rest
            self.concept_primary_val = val
        else:
            self.pools = build_text_pools(cfg)
            if self.family == "style":
                if cache_dir is None:
                    cache_dir = Path(cfg.rewriter.cache_dir or Path(cfg.output_dir) / "rewrite_cache")
                self.store = _build_style_store(cfg, self.pools, cache_dir)

    def inject_splits(self, lam: float, run_idx: int) -> dict[str, Dataset]:
        cfg = self.cfg
        run_seed = derive_seed(cfg.seed, "run", run_idx)
        out: dict[str, Dataset] = {}
        for split_name, mode in SPLIT_MODES:
            seed = derive_seed(run_seed, "inject", split_name)
            sched = resolve(self.base, mode, lam)
            if self.family == "concept":
                ds = self._inject_concept(split_name, mode, sched, lam, seed)
            elif self.family == "style":
                source = self._source_for(split_name)
                ds = style.inject_style(source, self.store, sched, seed)
            else:
                source = self._source_for(split_name)
                ds = self._inject_occurrence(source, split_name, sched, seed)
            ds.split = split_name
            out[split_name] = ds
        return out

    def _source_for(self, split_name: str) -> Dataset:
        if split_name == "train":
            return self.pools.train
        if split_name == "validation":
            return self.pools.validation
        return self.pools.test

    def _inject_occurrence(self, source, split_name, sched, seed) -> Dataset:
        st = self.cfg.shortcut_type
        if st == "single_term":
            return occurrence.inject_single_term(
                source, occurrence.default_trigger_spec(), sched, seed
            )
        if st == "synonym":
            return occurrence.inject_synonym(
                source, occurrence.default_synonym_spec(), sched, seed
            )
        split_kind = "train" if split_name in ("train", "validation") else "eval"
        return occurrence.inject_category(
            source, occurrence.default_category_spec(), split_kind, sched, seed
        )

    def _inject_concept(self, split_name, mode, sched, lam, seed) -> Dataset:
        plan = self.plan
        corpus = self.aspect_train if split_name in ("train", "validation") else self.aspect_test
        if split_name == "train":
            primary = self.concept_primary_train
        elif split_name == "validation":
            primary = self.concept_primary_val
        else:
            primary = corpus.aspects[plan.primary_aspect]
        if not primary.samples:
            return Dataset(primary.label_space, "validation", [], dict(primary.provenance))
        if self.cfg.shortcut_type == "concept_occurrence":
            scoped = concept.AspectCorpus(
                {
                    plan.primary_aspect: primary,
                    plan.distractor_a: corpus.aspects[plan.distractor_a],
                    plan.distractor_b: corpus.aspects[plan.distractor_b],
                }
            )
            return concept.inject_concept_occurrence(scoped, plan, sched, seed)
        lam_used = lam if mode == TRAIN else 1.0
        return concept.inject_concept_correlation(
            primary, corpus.aspects[plan.distractor_a], plan, mode, lam_used, seed
        )

    def run_once(self, lam: float, run_idx: int, out_dir: Path | None = None) -> DeltaReport:
        """Inject, train, predict, and score one (lambda, run) cell."""
        cfg = self.cfg
        splits = self.inject_splits(lam, run_idx)
        run_seed = derive_seed(cfg.seed, "run", run_idx)
        fcfg = FeatureConfig(cfg.train.dim, cfg.train.ngram_max, cfg.train.lowercase)
        tcfg = TrainConfig(
            cfg.train.epochs, cfg.train.learning_rate, cfg.train.l2,
            seed=derive_seed(run_seed, "train"),
        )
        model = train(splits["train"], fcfg, tcfg)
        reports = {}
        for split_name in ("test", "anti_test"):
            preds = [(p.id, p.pred) for p in predict(model, splits[split_name])]
            reports[split_name] = evaluate_split(preds, splits[split_name], split_name)
        report = delta_report(reports["test"], reports["anti_test"])
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            for split_name, ds in splits.items():
                save_dataset(ds, out_dir / f"{split_name}.jsonl")
            summary = injection_summary(splits, self.base, lam, cfg.shortcut_type)
            summary["config_hash"] = cfg.config_hash()
            (out_dir / "injection_summary.json").write_text(
                json.dumps(summary, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
                encoding="utf-8",
            )
            write_report_json(report, out_dir / "metrics.json", cfg.config_hash())
        return report


def injection_summary(
    splits: dict[str, Dataset], base: BaseSchedule, lam: float, shortcut_type: str
) -> dict:
    """Per-split, per-label empirical coin rates against the schedule."""
    out: dict = {"shortcut_type": shortcut_type, "lambda": lam, "splits": {}}
    for split_name, ds in splits.items():
        mode = dict(SPLIT_MODES)[split_name]
        sched = resolve(base, mode, lam)
        per_label: dict[str, dict] = {}
        counts: dict[int, list[int]] = {}
        for s in ds.samples:
            if s.meta is None or s.meta.coin is None:
                continue
            n, k = counts.get(s.label, [0, 0])
            counts[s.label] = [n + 1, k + (1 if s.meta.coin else 0)]
        for label in sorted(counts):
            n, k = counts[label]
            expected = sched.probs[label]
            rate = k / n if n else 0.0
            tol = binomial_tolerance(expected, n) if n else 0.0
            per_label[str(label)] = {
                "n": n,
                "coin_rate": rate,
                "expected": expected,
                "tolerance": tol,
                "within": abs(rate - expected) <= tol,
            }
        out["splits"][split_name] = per_label
    return out


def _sweep_job(args: tuple) -> tuple[float, int, DeltaReport]:
    cfg_dict, lam, run_idx, out_dir = args
    cfg = RunConfig.from_dict(cfg_dict)
    pipeline = Pipeline(cfg, cache_dir=Path(out_dir).parent.parent / "rewrite_cache" if out_dir else None)
    report = pipeline.run_once(lam, run_idx, Path(out_dir) if out_dir else None)
    return lam, run_idx, report


def sweep_strength(
    cfg: RunConfig,
    lambdas: Sequence[float] | None = None,
    runs_per_lambda: int | None = None,
    out_dir: str | Path | None = None,
    workers: int = 1,
) -> list[tuple[float, float, float]]:
    """Full lambda grid x runs; returns (lambda, mean F1 delta, variance) rows.

    With ``out_dir`` set, writes per-run artifacts, the flat CSV, the
    aggregated JSON report, and a run manifest (the only file holding
    timestamps).
    """
    lambdas = list(cfg.lambdas if lambdas is None else lambdas)
    if not lambdas:
        raise ValueError("lambda list must be nonempty")
    runs = cfg.runs_per_setting if runs_per_lambda is None else runs_per_lambda
    out_path = Path(out_dir) if out_dir is not None else None

    def run_dir(lam: float, run_idx: int) -> str | None:
        if out_path is None:
            return None
        return str(out_path / f"lambda_{lam}" / f"run_{run_idx}")

    jobs = [
        (cfg.hashable_dict() | {"output_dir": cfg.output_dir}, lam, run_idx, run_dir(lam, run_idx))
        for lam in lambdas
        for run_idx in range(runs)
    ]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_job, jobs))
    else:
        pipeline = Pipeline(cfg, cache_dir=out_path / "rewrite_cache" if out_path else None)
        results = [
            (lam, run_idx, pipeline.run_once(lam, run_idx, Path(d) if d else None))
            for (_, lam, run_idx, d) in jobs
        ]

    by_lambda: dict[float, list[tuple[int, DeltaReport]]] = {lam: [] for lam in lambdas}
    for lam, run_idx, report in results:
        by_lambda[lam].append((run_idx, report))
    table: list[tuple[float, float, float]] = []
    aggregates: dict[float, DeltaReport] = {}
    for lam in lambdas:
        per_run = [r for _, r in sorted(by_lambda[lam])]
        agg = aggregate_runs(per_run)
        aggregates[lam] = agg
        table.append((lam, agg.delta_macro_f1, agg.var_delta))

    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
        rows = []
        for lam in lambdas:
            for run_idx, report in sorted(by_lambda[lam]):
                rows.extend(report_rows(cfg.shortcut_type, lam, run_idx, report))
            rows.extend(report_rows(cfg.shortcut_type, lam, "mean", aggregates[lam]))
        write_flat_csv(rows, out_path / "sweep.csv")
        doc = {
            "config_hash": cfg.config_hash(),
            "shortcut_type": cfg.shortcut_type,
            "lambdas": lambdas,
            "runs_per_lambda": runs,
            "per_lambda": {repr(lam): aggregates[lam].to_json_dict() for lam in lambdas},
        }
        (out_path / "report.json").write_text(
            json.dumps(doc, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        write_manifest(out_path, cfg)
    return table


def write_manifest(out_path: Path, cfg: RunConfig) -> None:
    """Run manifest: artifact list + config hash + wall-clock timestamp.

    Timestamps live only here so the rest of the tree is byte-reproducible.
    """
    files = sorted(
        str(p.relative_to(out_path))
        for p in out_path.rglob("*")
        if p.is_file() and p.relative_to(out_path) != Path("manifest.json")
    )
    doc = {
        "config_hash": cfg.config_hash(),
        "created_unix": time.time(),
        "files": files,
    }
    (out_path / "manifest.json").write_text(
        json.dumps(doc, ensure_ascii=False, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
