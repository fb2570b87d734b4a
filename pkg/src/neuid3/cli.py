"""Command-line interface: ``neuid3 <command> [flags]``.

Exit status is 0 on success, 1 on a usage error and 2 on a runtime error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import baselines
from .config import int_list, load_config
from .data.archive import read_archive, write_archive
from .data.cards import CONCEPTS, DESK_SIZES, FEATURE_KEYS, make_eleusis_dataset
from .data.glyphs import GLYPH_DIM
from .data.tabular import (binarize_labels, ingest_csv, onehot_transform, subsymbolize,
                           synthetic_rule_table)
from .errors import NeuID3Error
from .experiments import ExperimentSpec, format_table, run_experiment
from .induction import InductionConfig, neuid3
from .metrics import score, stratified_folds
from .pool import PoolSpec, build_pool, neural_fact_pool, symbolic_pool
from .tree import load_tree, predict, save_tree, to_dot

log = logging.getLogger("neuid3")

POOL_KINDS = ("nf", "opt", "opt_union", "bad", "symbolic")
INDUCTION_KEYS = {f for f in InductionConfig.__dataclass_fields__}
EXPERIMENT_KEYS = {"pool", "concept", "concepts", "seeds", "sizes", "folds", "ranks", "hidden_order",
                   "baseline_epochs", "baseline_learning_rate", "baseline_batch_size",
                   "freeze_reused", "rule", "rows", "features"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# --- settings ------------------------------------------------------------------------

def _settings(args) -> dict[str, str]:
    """Config file values overridden by ``--set`` pairs."""
    values = load_config(args.config) if getattr(args, "config", None) else {}
    for item in getattr(args, "set", None) or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects key=value, got {item!r}")
        values[key.strip()] = value.strip()
    unknown = set(values) - INDUCTION_KEYS - EXPERIMENT_KEYS
    if unknown:
        raise UsageError(f"unknown setting(s): {', '.join(sorted(unknown))}")
    return values


def _seed(args, values) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    if "seed" in values:
        return int(values["seed"])
    env = os.environ.get("NEUID3_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"NEUID3_SEED must be an integer, got {env!r}") from None
    return 0


def _induction_config(args, values) -> InductionConfig:
    d = {k: v for k, v in values.items() if k in INDUCTION_KEYS}
    d["seed"] = _seed(args, values)
    d["jobs"] = getattr(args, "jobs", 1) or 1
    try:
        return InductionConfig.from_dict(d)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _experiment_spec(args, values, experiment: str, **overrides) -> ExperimentSpec:
    kw = {}
    if "pool" in values:
        kw["pool"] = values["pool"]
    if "concepts" in values or "concept" in values:
        kw["concepts"] = tuple(values.get("concepts", values.get("concept")).replace(",", " ").split())
    if "seeds" in values:
        kw["seeds"] = int_list(values["seeds"])
    if "sizes" in values:
        kw["sizes"] = int_list(values["sizes"])
    for key, cast in (("folds", int), ("ranks", int), ("hidden_order", str), ("rule", str),
                      ("rows", int), ("features", int)):
        if key in values:
            kw["n_features" if key == "features" else key] = cast(values[key])
    if "freeze_reused" in values:
        kw["freeze_reused"] = values["freeze_reused"].lower() in ("1", "true", "yes")
    bkw = {}
    for key, cast in (("baseline_epochs", int), ("baseline_learning_rate", float),
                      ("baseline_batch_size", int)):
        if key in values:
            bkw[key.replace("baseline_", "")] = cast(values[key])
    if getattr(args, "seeds", None):
        kw["seeds"] = tuple(args.seeds)
    kw.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentSpec(experiment, induction=_induction_config(args, values),
                              baseline=baselines.BaselineConfig(**bkw), jobs=args.jobs, **kw)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from None


# --- commands ------------------------------------------------------------------------

def cmd_generate(args) -> int:
    values = _settings(args)
    seed = _seed(args, values)
    if args.kind == "eleusis":
        if args.concept not in CONCEPTS:
            raise UsageError(f"--concept must be one of {', '.join(CONCEPTS)}")
        sizes = tuple(args.sizes or DESK_SIZES)
        if len(sizes) != 3:
            raise UsageError("--sizes needs three numbers: train val test")
        train, val, test = make_eleusis_dataset(args.concept, seed, sizes, args.ranks, args.hidden_order)
        meta = {"kind": "eleusis", "concept": args.concept, "seed": seed, "ranks": args.ranks,
                "hidden_order": args.hidden_order, "feature_keys": list(FEATURE_KEYS)}
    else:
        if args.csv:
            if not args.class_column:
                raise UsageError("--csv needs --class-column")
            table = onehot_transform(binarize_labels(ingest_csv(args.csv, args.class_column)), args.d, seed)
            source = {"csv": str(args.csv), "class_column": args.class_column}
        else:
            table = synthetic_rule_table(args.rows, seed, args.features, args.rule)
            source = {"rule": args.rule}
        folds = stratified_folds(table.labels, 10, seed)
        test_idx = np.sort(np.concatenate(folds[:2]))
        val_idx = folds[2]
        train_idx = np.sort(np.concatenate(folds[3:]))
        train_render = subsymbolize(table, seed, "train")
        test_render = subsymbolize(table, seed, "test")
        train, val, test = train_render.subset(train_idx), train_render.subset(val_idx), test_render.subset(test_idx)
        meta = {"kind": "tabular", "seed": seed, "atoms": table.names,
                "feature_keys": table.names, "groups": table.groups, **source}
    write_archive(args.out, {"train": train, "val": val, "test": test}, meta)
    log.info("wrote %s", args.out)
    return 0


def _pool_for(meta: dict, kind: str, concept: str | None, seed: int):
    if meta.get("kind") == "tabular":
        if kind == "symbolic":
            return symbolic_pool(meta["atoms"])
        if kind == "nf":
            return neural_fact_pool(meta["feature_keys"], GLYPH_DIM, seed)
        raise UsageError("tabular archives support --pool symbolic or nf")
    if kind == "symbolic":
        raise UsageError("--pool symbolic applies to tabular archives only")
    concept = concept or meta.get("concept")
    return build_pool(PoolSpec(kind, concept), int(meta.get("ranks", 8)), seed)


def cmd_induce(args) -> int:
    values = _settings(args)
    cfg = _induction_config(args, values)
    meta, splits = read_archive(args.data)
    pool_kind = args.pool or values.get("pool", "nf")
    if pool_kind not in POOL_KINDS:
        raise UsageError(f"--pool must be one of {', '.join(POOL_KINDS)}")
    train = splits["train"]
    if pool_kind != "symbolic":
        train = train.without_facts()
    tree = neuid3(train, _pool_for(meta, pool_kind, args.concept, cfg.seed), cfg)
    save_tree(tree, args.out)
    log.info("tree with %d leaves written to %s", len(tree.leaves()), args.out)
    return 0


def cmd_evaluate(args) -> int:
    tree = load_tree(args.tree)
    meta, splits = read_archive(args.data)
    data = splits[args.split]
    metrics = score(predict(tree, data), data.labels, splits["train"].labels)
    doc = {"split": args.split, "metrics": metrics, "n_examples": len(data),
           "leaves": len(tree.leaves()), "depth": tree.depth}
    text = json.dumps(doc, sort_keys=True, indent=1) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _write_results(results: dict, out) -> None:
    sys.stdout.write(format_table(results))
    if out:
        path = Path(out)
        path.mkdir(parents=True, exist_ok=True)
        (path / "results.json").write_text(json.dumps(results, sort_keys=True, indent=1) + "\n")
        (path / "results.txt").write_text(format_table(results))


def cmd_compare(args) -> int:
    values = _settings(args)
    if args.data is None:
        spec = _experiment_spec(args, values, "uci_compare" if args.protocol == "uci" else "eleusis_compare",
                                concepts=tuple(args.concept) if args.concept else None)
        results = run_experiment(spec, args.out)
        sys.stdout.write(format_table(results))
        return 0
    cfg = _induction_config(args, values)
    meta, splits = read_archive(args.data)
    train, test = splits["train"], splits["test"]
    bcfg = replace(_experiment_spec(args, values, "eleusis_compare").baseline, seed=cfg.seed)
    rows = {}
    if meta.get("kind") == "tabular":
        kinds = ("symbolic", "nf")
        model, _ = baselines.train_mlp(train.without_facts(), "subsymbolic", bcfg, keys=meta["feature_keys"])
    else:
        kinds = (args.pool or values.get("pool", "nf"),)
        model, _ = baselines.train_card_nn(train, bcfg)
    rows["baseline"] = score(model.predict(test.without_facts()), test.labels, train.labels)
    for kind in kinds:
        tr = train if kind == "symbolic" else train.without_facts()
        tree = neuid3(tr, _pool_for(meta, kind, None, cfg.seed), cfg)
        rows[f"nldt_{kind}"] = score(predict(tree, test), test.labels, train.labels)
    header = ["model", "accuracy", "default_accuracy", "f1_pos", "f1_neg"]
    table = [header] + [[m] + [f"{r[k]:.3f}" for k in header[1:]] for m, r in rows.items()]
    widths = [max(len(r[i]) for r in table) for i in range(len(header))]
    sys.stdout.write("\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in table) + "\n")
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "results.json").write_text(json.dumps({"models": rows}, sort_keys=True, indent=1) + "\n")
    return 0


def cmd_pools(args) -> int:
    values = _settings(args)
    if args.concept not in CONCEPTS:
        raise UsageError(f"--concept must be one of {', '.join(CONCEPTS)}")
    spec = _experiment_spec(args, values, "pools", concepts=(args.concept,),
                            sizes=tuple(args.sizes) if args.sizes else None)
    _write_results(run_experiment(spec), args.out)
    return 0


def cmd_reuse(args) -> int:
    values = _settings(args)
    spec = _experiment_spec(args, values, "reuse", sizes=tuple(args.sizes) if args.sizes else None)
    _write_results(run_experiment(spec), args.out)
    return 0


def cmd_export(args) -> int:
    tree = load_tree(args.tree)
    Path(args.dot).write_text(to_dot(tree), encoding="utf-8")
    return 0


# --- parser --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="neuid3", description="Induce and evaluate neurosymbolic decision trees.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug logs")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, seeds=False):
        sp.add_argument("--config", help="key = value settings file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one setting")
        sp.add_argument("--jobs", type=int, default=1, help="worker threads")
        if seeds:
            sp.add_argument("--seeds", type=int, nargs="+", help="seeds to run")
        else:
            sp.add_argument("--seed", type=int, help="random seed (default: $NEUID3_SEED or 0)")

    g = sub.add_parser("generate", help="build a dataset archive")
    g.add_argument("--kind", choices=("tabular", "eleusis"), required=True)
    g.add_argument("--concept")
    g.add_argument("--out", required=True)
    g.add_argument("--sizes", type=int, nargs=3, metavar=("TRAIN", "VAL", "TEST"))
    g.add_argument("--ranks", type=int, default=8)
    g.add_argument("--hidden-order", choices=("disjunction", "conjunction"), default="disjunction")
    g.add_argument("--csv")
    g.add_argument("--class-column")
    g.add_argument("--d", type=int, choices=(2, 3, 4), help="binary features per source column")
    g.add_argument("--rule", default="x0 if x1 else x2", help="label rule of the synthetic table")
    g.add_argument("--rows", type=int, default=200)
    g.add_argument("--features", type=int, default=8)
    common(g)
    g.set_defaults(func=cmd_generate)

    i = sub.add_parser("induce", help="induce a tree from an archive")
    i.add_argument("--data", required=True)
    i.add_argument("--pool", choices=POOL_KINDS)
    i.add_argument("--concept", help="concept for opt/bad pools (default: the archive's)")
    i.add_argument("--out", required=True)
    common(i)
    i.set_defaults(func=cmd_induce)

    e = sub.add_parser("evaluate", help="score a saved tree on an archive split")
    e.add_argument("--tree", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--split", choices=("train", "val", "test"), default="test")
    e.add_argument("--out")
    e.set_defaults(func=cmd_evaluate)

    c = sub.add_parser("compare", help="tree versus neural baseline")
    c.add_argument("--data", help="archive to compare on; without it a protocol is run")
    c.add_argument("--protocol", choices=("uci", "eleusis"), default="eleusis")
    c.add_argument("--concept", nargs="+")
    c.add_argument("--pool", choices=POOL_KINDS)
    c.add_argument("--out")
    common(c, seeds=True)
    c.add_argument("--seed", type=int)
    c.set_defaults(func=cmd_compare)

    po = sub.add_parser("pools", help="compare candidate pools on one concept")
    po.add_argument("--concept", required=True)
    po.add_argument("--sizes", type=int, nargs=3, metavar=("TRAIN", "VAL", "TEST"))
    po.add_argument("--out")
    common(po, seeds=True)
    po.set_defaults(func=cmd_pools)

    r = sub.add_parser("reuse", help="reuse pre-trained tests on hidden_order_simple")
    r.add_argument("--sizes", type=int, nargs=3, metavar=("TRAIN", "VAL", "TEST"))
    r.add_argument("--out")
    common(r, seeds=True)
    r.set_defaults(func=cmd_reuse)

    x = sub.add_parser("export", help="write a Graphviz file for a saved tree")
    x.add_argument("--tree", required=True)
    x.add_argument("--dot", required=True)
    x.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "generate" and args.kind == "eleusis" and not args.concept:
        parser.error("generate --kind eleusis needs --concept")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"neuid3: error: {exc}", file=sys.stderr)
        return 1
    except (NeuID3Error, OSError, ValueError, KeyError) as exc:
        print(f"neuid3: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
