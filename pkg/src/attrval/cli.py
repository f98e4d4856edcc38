"""Command-line driver: synth, train, infer, eval, bootstrap, prcurve, bench, reproduce.

Human-readable tables go to stdout; machine formats are written under --out.
Failures exit nonzero with one JSON line on stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from .corpus import default_grammar, generate_catalog, load_jsonl, partial_labeling, save_jsonl, stats
from .eval import evaluate, latency_bench, pr_curve, score_extractions, write_csv
from .eval.systems import build_system, predict_in_chunks
from .models import load_model
from .pipeline import TrainPlan, bootstrap, train
from .text import split_words
from .types import DataError

log = logging.getLogger("attrval")

SYNTH_DEFAULTS = {"n_train": 10000, "n_test": 1000, "coverage": 0.4, "labeling_mode": "attribute",
                  "synonyms": True}


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _read_config(path, defaults: dict | None = None) -> dict:
    cfg = dict(defaults or {})
    if path:
        p = _existing(path)
        try:
            loaded = json.loads(p.read_text())
        except json.JSONDecodeError as e:
            raise UsageError(f"config {p} is not valid JSON: {e}") from e
        if not isinstance(loaded, dict):
            raise UsageError(f"config {p} must be a JSON object")
        if defaults is not None:
            unknown = set(loaded) - set(defaults)
            if unknown:
                raise UsageError(f"unknown config field(s) in {p}: {sorted(unknown)}")
        cfg.update(loaded)
    return cfg


def _existing(path) -> Path:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"missing file: {p}")
    return p


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def _load_models(args):
    if not args.checkpoint:
        raise UsageError("at least one --checkpoint is required")
    return [load_model(_existing(p)) for p in args.checkpoint]


def _read_names(path) -> list[tuple[str, ...]]:
    """Names from a dataset JSONL file or a plain text file with one name per line."""
    p = _existing(path)
    if p.suffix == ".jsonl":
        return [ex.words for ex in load_jsonl(p)]
    return [tuple(split_words(line)) for line in p.read_text().splitlines() if line.strip()]


def _pairs_json(words, pairs) -> list[dict]:
    return [{**p.to_json(), "value": p.value(words)} for p in pairs]


def _table(rows: list[tuple[str, dict]]) -> str:
    head = f"{'Architecture':<28}{'Precision':>10}{'Recall':>10}{'F1-score':>10}{'Tagged':>10}"
    lines = [head, "-" * len(head)]
    for name, r in rows:
        lines.append(f"{name:<28}{100 * r['precision']:>10.1f}{100 * r['recall']:>10.1f}"
                     f"{100 * r['f1']:>10.1f}{r['tagged_ratio']:>10.3f}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    cfg = _read_config(args.config, SYNTH_DEFAULTS)
    if args.n is not None:
        cfg["n_train"] = args.n
    if cfg["n_test"] < 0:
        raise UsageError("n_test must be >= 0")
    out = _out_dir(args)
    data = generate_catalog(default_grammar(), cfg["n_train"] + cfg["n_test"], args.seed, synonyms=cfg["synonyms"])
    train_full, test = data[: cfg["n_train"]], data[cfg["n_train"]:]
    train_part = partial_labeling(train_full, cfg["coverage"], args.seed + 1, mode=cfg["labeling_mode"])
    save_jsonl(train_part, out / "train.jsonl")
    summary = {"seed": args.seed, "config": cfg, "train": stats(train_part),
               "train_full": stats(train_part, which="full")}
    if test:
        save_jsonl(test, out / "test.jsonl")
        summary["test"] = stats(test, which="full")
    _write_json(out / "stats.json", summary)
    s = summary["train"]
    print(f"train: {s['n_examples']} names, tagged ratio {s['tagged_ratio']:.3f} "
          f"(full {summary['train_full']['tagged_ratio']:.3f}), {s['n_pairs']} pairs, "
          f"{s['n_attributes']} attributes, mean length {s['mean_length']:.2f}")
    if test:
        print(f"test:  {len(test)} names with full labels")
    return 0


def cmd_train(args) -> int:
    base = _read_config(args.config) if args.config else {}
    if args.kind:
        base["model_kind"] = args.kind
    if "model_kind" not in base:
        raise UsageError("model kind missing: pass --kind or set model_kind in --config")
    base["seed"] = args.seed
    if args.dataset:
        base["dataset"] = args.dataset
    if args.no_marker:
        base["marker_enabled"] = False
    if args.vp_rate is not None:
        base["vp_rate"] = args.vp_rate
    if args.epochs is not None:
        base["epochs"] = args.epochs
    plan = TrainPlan.from_json(base)
    if plan.dataset is None:
        raise UsageError("no training dataset: pass --dataset or set dataset in --config")
    data = load_jsonl(_existing(plan.dataset))
    out = _out_dir(args)
    path = out / f"{args.name or plan.model_kind}.ckpt"
    model = train(plan, data, out=path)
    hist = model.extra["loss_history"]
    print(f"{plan.model_kind}: {model.n_parameters()} parameters, {model.extra['n_records']} records, "
          f"loss {hist[0]:.4f} -> {hist[-1]:.4f}")
    print(f"checkpoint: {path}")
    return 0


def cmd_infer(args) -> int:
    system = build_system(_load_models(args))
    if args.name:
        names = [tuple(split_words(args.name))]
    elif args.dataset:
        names = _read_names(args.dataset)
    else:
        raise UsageError("pass --name or --dataset")
    preds, malformed = predict_in_chunks(system, names)
    out = _out_dir(args)
    path = out / "predictions.jsonl"
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for words, pairs, bad in zip(names, preds, malformed):
            rec = {"name": " ".join(words), "pairs": _pairs_json(words, pairs), "malformed": bad}
            f.write(json.dumps(rec) + "\n")
    for words, pairs in list(zip(names, preds))[:20]:
        shown = "; ".join(f"{p.attribute}: {p.value(words)}" for p in pairs) or "(none)"
        print(f"{' '.join(words)}  ->  {shown}")
    print(f"predictions: {path}")
    return 0


def cmd_eval(args) -> int:
    cfg = _read_config(args.config, {"long_threshold": 9, "synonyms": None})
    system = build_system(_load_models(args))
    if not args.dataset:
        raise UsageError("--dataset is required")
    data = load_jsonl(_existing(args.dataset))
    if not data:
        raise DataError(f"empty dataset: {args.dataset}")
    report = evaluate(system, data, cfg["long_threshold"], cfg["synonyms"])
    out = _out_dir(args)
    _write_json(out / "metrics.json", {"system": system.name, "seed": args.seed,
                                       "checkpoints": list(args.checkpoint), "report": report.to_json()})
    rows = [(system.name, report.to_json())]
    if "long_names" in report.slices:
        rows.append((f"  names >= {cfg['long_threshold']} words", report.slices["long_names"]))
    print(_table(rows))
    return 0


def cmd_bootstrap(args) -> int:
    models = {m.kind: m for m in _load_models(args)}
    if set(models) != {"genae", "tocve"}:
        raise UsageError(f"bootstrap needs one genae and one tocve checkpoint, got {sorted(models)}")
    if not args.dataset:
        raise UsageError("--dataset is required")
    data = load_jsonl(_existing(args.dataset))
    if not data:
        raise DataError(f"empty dataset: {args.dataset}")
    retagged, summary = bootstrap(data, models["genae"], models["tocve"])
    out = _out_dir(args)
    save_jsonl(retagged, out / "retagged.jsonl")
    _write_json(out / "bootstrap_stats.json", {"seed": args.seed, **summary})
    for key in ("tagged_ratio", "n_pairs", "n_attributes"):
        print(f"{key:<14}{summary['before'][key]:>12.4g} -> {summary['after'][key]:.4g}")
    return 0


def cmd_prcurve(args) -> int:
    models = _load_models(args)
    rescorers = [m for m in models if m.kind == "rescorer"]
    if len(rescorers) != 1:
        raise UsageError("prcurve needs exactly one rescorer checkpoint")
    system = build_system([m for m in models if m.kind != "rescorer"])
    if not args.dataset:
        raise UsageError("--dataset is required")
    data = load_jsonl(_existing(args.dataset))
    if not data:
        raise DataError(f"empty dataset: {args.dataset}")
    preds, _ = predict_in_chunks(system, [ex.words for ex in data])
    curve = pr_curve(score_extractions(rescorers[0], data, preds), data, args.n or 21)
    out = _out_dir(args)
    path = write_csv(curve, out / f"pr_{system.name}.csv")
    for pt in curve:
        print(f"t={pt.threshold:.2f}  P={pt.precision:.4f}  R={pt.recall:.4f}")
    print(f"curve: {path}")
    return 0


def cmd_bench(args) -> int:
    cfg = _read_config(args.config, {"warmup": 10, "min_queries": 100})
    system = build_system(_load_models(args))
    if not args.dataset:
        raise UsageError("--dataset (queries file) is required")
    names = _read_names(args.dataset)
    if not names:
        raise DataError(f"no queries in {args.dataset}")
    n = args.n or len(names)
    queries = (names * (n // len(names) + 1))[:n]
    report = latency_bench(system, queries, cfg["warmup"], cfg["min_queries"])
    report["seed"] = args.seed
    out = _out_dir(args)
    _write_json(out / "bench.json", report)
    print(f"{system.name}: {report['mean_ms']:.2f} +- {report['std_ms']:.2f} ms/query over "
          f"{report['n_queries']} queries ({report['hardware']})")
    return 0


def cmd_reproduce(args) -> int:
    from .experiments import Experiment, ExperimentConfig, criteria_metrics, pr_summary

    cfg = ExperimentConfig.from_json({**_read_config(args.config), "seed": args.seed})
    out = _out_dir(args)
    exp = Experiment(cfg, workdir=out)
    metrics = {"seed": args.seed, "config": cfg.to_json(), **criteria_metrics(exp), "table": exp.table()}
    _write_json(out / "metrics.json", metrics)
    curves = exp.pr_curves()
    for name, c in curves.items():
        write_csv(c, out / f"pr_{name}.csv")
    _write_json(out / "prcurve.json", pr_summary(curves))
    _write_json(out / "bench.json", exp.latency())
    print(_table([(k, v) for k, v in metrics["table"].items()]))
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="attrval", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0, help="log progress (repeat for debug)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_, flags):
        p = sub.add_parser(name, help=help_, description=help_)
        p.add_argument("--seed", type=int, default=0, help="global seed, recorded in every artifact")
        p.add_argument("--out", default="out", help="output directory (created if absent)")
        if "config" in flags:
            p.add_argument("--config", help="JSON config file")
        if "checkpoint" in flags:
            p.add_argument("--checkpoint", action="append", default=[], help="checkpoint path (repeatable)")
        if "dataset" in flags:
            p.add_argument("--dataset", help=flags["dataset"])
        if "name" in flags:
            p.add_argument("--name", help=flags["name"])
        if "n" in flags:
            p.add_argument("--n", type=int, help=flags["n"])
        p.set_defaults(fn=fn)
        return p

    add("synth", cmd_synth, "generate a synthetic catalog with partial labels",
        {"config": 1, "n": "number of training names (overrides config)"})
    p = add("train", cmd_train, "train one model from a train-plan config",
            {"config": 1, "dataset": "training JSONL (overrides config)", "name": "checkpoint file stem"})
    p.add_argument("--kind", choices=["genae", "tocve", "genave", "tocave", "rescorer"], help="model kind")
    p.add_argument("--no-marker", action="store_true", help="disable the marker embedding")
    p.add_argument("--vp-rate", type=float, help="value-pruning negatives per pair (tocve)")
    p.add_argument("--epochs", type=int, help="training epochs (overrides config)")
    add("infer", cmd_infer, "extract attribute-value pairs",
        {"checkpoint": 1, "dataset": "names file (.txt one per line, or dataset .jsonl)", "name": "single name"})
    add("eval", cmd_eval, "score a system against a labeled dataset",
        {"config": 1, "checkpoint": 1, "dataset": "labeled JSONL"})
    add("bootstrap", cmd_bootstrap, "re-tag a training set with a two-stage system",
        {"checkpoint": 1, "dataset": "training JSONL"})
    add("prcurve", cmd_prcurve, "precision-recall curve from rescorer confidences",
        {"checkpoint": 1, "dataset": "labeled JSONL", "n": "number of thresholds (default 21)"})
    add("bench", cmd_bench, "per-query latency at batch size one",
        {"config": 1, "checkpoint": 1, "dataset": "queries file (.txt or .jsonl)",
         "n": "number of timed queries (default: all)"})
    add("reproduce", cmd_reproduce, "train and score every system variant on the synthetic corpus",
        {"config": 1})
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return args.fn(args)
    except Exception as e:  # noqa: BLE001 - every failure becomes one parseable line
        msg = " ".join(str(e).split())
        print(json.dumps({"error": type(e).__name__, "command": args.command, "message": msg}), file=sys.stderr)
        if args.verbose > 1:
            raise
        return 1


if __name__ == "__main__":
    sys.exit(main())
