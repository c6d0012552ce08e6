"""Command-line entry point orchestrating the full pipeline from configs.

Subcommands: inject, rewrite, train, predict, eval, attribute, sweep,
report. Failures exit nonzero after printing a machine-readable error
record (one JSON object) to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import attribution as attribution_mod
from . import style
from .corpus import DatasetError, load_dataset, save_dataset
from .evaluation import delta_report, evaluate_split, write_report_json
from .refmodel import (
    FeatureConfig,
    TrainConfig,
    load_model,
    load_predictions,
    predict,
    save_model,
    save_predictions,
    train,
)
from .runner import (
    ConfigError,
    Pipeline,
    RunConfig,
    injection_summary,
    sweep_strength,
    write_manifest,
)
from .schedule import derive_seed


def _fail(field: str, message: str, code: int = 2) -> int:
    record = {"error": {"field": field, "message": message}}
    print(json.dumps(record, ensure_ascii=False), file=sys.stderr)
    return code


def _load_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "lambda_", None) is not None:
        cfg.lambdas = [args.lambda_]
    if args.workers is not None:
        cfg.workers = args.workers
    if args.out is not None:
        cfg.output_dir = args.out
    cfg.validate()
    return cfg


def _copy_config(cfg: RunConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    doc = cfg.hashable_dict() | {"output_dir": cfg.output_dir, "workers": cfg.workers}
    (out / "config.json").write_text(
        json.dumps(doc, ensure_ascii=False, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def cmd_inject(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    out = Path(cfg.output_dir)
    _copy_config(cfg, out)
    pipeline = Pipeline(cfg, cache_dir=out / "rewrite_cache")
    lam = cfg.lambdas[0]
    splits = pipeline.inject_splits(lam, run_idx=0)
    if args.mode:
        wanted = {"train": ("train",), "test": ("test",), "anti": ("anti_test",)}[args.mode]
        splits = {k: v for k, v in splits.items() if k in wanted}
    for split_name, ds in splits.items():
        save_dataset(ds, out / f"{split_name}.jsonl")
    summary = injection_summary(splits, cfg.base_schedule(), lam, cfg.shortcut_type)
    summary["config_hash"] = cfg.config_hash()
    (out / "injection_summary.json").write_text(
        json.dumps(summary, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    write_manifest(out, cfg)
    print(f"wrote {len(splits)} dataset files to {out}")
    return 0


def cmd_rewrite(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    if cfg.shortcut_type not in ("register", "author"):
        return _fail("shortcut_type", "rewrite needs a style shortcut (register or author)")
    out = Path(cfg.output_dir)
    _copy_config(cfg, out)
    pipeline = Pipeline(cfg, cache_dir=out / "rewrite_cache")
    coverage = pipeline.store.coverage(
        [s.id for s in pipeline.pools.train.samples]
        + [s.id for s in pipeline.pools.validation.samples]
        + [s.id for s in pipeline.pools.test.samples]
    )
    print(f"rewrite cache ready under {out / 'rewrite_cache'} (coverage {coverage:.3f})")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    space = cfg.label_space()
    ds = load_dataset(args.data, space, split="train")
    fcfg = FeatureConfig(cfg.train.dim, cfg.train.ngram_max, cfg.train.lowercase)
    tcfg = TrainConfig(
        cfg.train.epochs,
        cfg.train.learning_rate,
        cfg.train.l2,
        seed=derive_seed(cfg.seed, "train"),
    )
    model = train(ds, fcfg, tcfg)
    out = Path(args.model or Path(cfg.output_dir) / "model.bin")
    save_model(model, out)
    print(f"trained on {len(ds)} samples; final epoch loss {model.train_history[-1]:.4f}; wrote {out}")
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    model = load_model(args.model)
    ds = load_dataset(args.data, model.label_space, split="test")
    preds = predict(model, ds)
    out = Path(args.pred_out or Path(cfg.output_dir) / "predictions.jsonl")
    save_predictions(preds, out)
    print(f"wrote {len(preds)} predictions to {out}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    space = cfg.label_space()
    gold_test = load_dataset(args.gold_test, space, split="test")
    gold_anti = load_dataset(args.gold_anti, space, split="anti_test")
    preds_test = [(p.id, p.pred) for p in load_predictions(args.pred_test)]
    preds_anti = [(p.id, p.pred) for p in load_predictions(args.pred_anti)]
    report = delta_report(
        evaluate_split(preds_test, gold_test, "test"),
        evaluate_split(preds_anti, gold_anti, "anti_test"),
    )
    out = Path(args.report_out or Path(cfg.output_dir) / "delta_report.json")
    write_report_json(report, out, cfg.config_hash())
    print(
        f"delta accuracy {report.delta_accuracy:+.4f}, "
        f"delta macro F1 {report.delta_macro_f1:+.4f} -> {out}"
    )
    return 0


def cmd_attribute(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    model = load_model(args.model)
    ds = load_dataset(args.data, model.label_space, split="test")
    annotated = [s for s in ds.samples if s.meta is not None]
    if not annotated:
        return _fail("data", "dataset has no shortcut annotations to attribute")
    attributions = [attribution_mod.linear_attribution(model, s) for s in annotated]
    sample_size = min(args.sample_size, len(annotated))
    table = attribution_mod.aggregate_shortcut_attribution(
        ds, attributions, sample_size=sample_size, seed=cfg.seed
    )
    lam = cfg.lambdas[0]
    out = Path(args.report_out or Path(cfg.output_dir) / "attribution.csv")
    attribution_mod.write_attribution_csv(table, lam, out)
    print(f"wrote shortcut-vs-others attribution for {sample_size} samples to {out}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    out = Path(cfg.output_dir)
    _copy_config(cfg, out)
    table = sweep_strength(cfg, out_dir=out, workers=cfg.workers)
    for lam, mean_delta, var in table:
        print(f"lambda={lam}: mean delta macro F1 {mean_delta:+.4f} (var {var:.6f})")
    print(f"artifacts under {out}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    import csv as _csv

    rows = []
    header = None
    for path in args.csvs:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = _csv.reader(fh)
            this_header = next(reader)
            if header is None:
                header = this_header
            elif this_header != header:
                return _fail("csvs", f"{path} has a different column set")
            rows.extend(reader)
    out = Path(args.report_out or "merged.csv")
    with out.open("w", newline="", encoding="utf-8") as fh:
        writer = _csv.writer(fh)
        writer.writerow(header or [])
        writer.writerows(rows)
    print(f"merged {len(args.csvs)} files ({len(rows)} rows) into {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shortcutbench",
        description="Inject controlled spurious correlations into text corpora "
        "and measure model susceptibility.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON run config path")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--lambda", dest="lambda_", type=float, help="override the lambda grid with one value")
        p.add_argument("--workers", type=int, help="parallel worker cap (results are identical)")
        p.add_argument("--out", help="output directory override")

    p = sub.add_parser("inject", help="emit train/validation/test/anti_test datasets")
    common(p)
    p.add_argument("--mode", choices=("train", "test", "anti"), help="emit only one split")
    p.set_defaults(func=cmd_inject)

    p = sub.add_parser("rewrite", help="populate the style rewrite cache")
    common(p)
    p.set_defaults(func=cmd_rewrite)

    p = sub.add_parser("train", help="train the reference classifier on a dataset file")
    common(p)
    p.add_argument("--data", required=True, help="training dataset (JSONL)")
    p.add_argument("--model", help="output model path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="run a saved model over a dataset file")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--pred-out", help="output predictions path")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="delta report from prediction files (any model)")
    common(p)
    p.add_argument("--pred-test", required=True)
    p.add_argument("--pred-anti", required=True)
    p.add_argument("--gold-test", required=True)
    p.add_argument("--gold-anti", required=True)
    p.add_argument("--report-out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("attribute", help="shortcut-vs-others token attribution table")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="annotated dataset (JSONL)")
    p.add_argument("--sample-size", type=int, default=100)
    p.add_argument("--report-out")
    p.set_defaults(func=cmd_attribute)

    p = sub.add_parser("sweep", help="full lambda grid x runs, end to end")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="merge flat CSV reports")
    common(p)
    p.add_argument("csvs", nargs="+", help="CSV files to merge")
    p.add_argument("--report-out")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail(exc.field, str(exc))
    except (DatasetError, style.RewriteError, ValueError, OSError) as exc:
        return _fail("<runtime>", str(exc), code=1)


if __name__ == "__main__":
    sys.exit(main())
