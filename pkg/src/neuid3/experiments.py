"""Experiment protocols: tabular and card comparisons, pool study, test reuse."""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import baselines
from .data.cards import DESK_SIZES, make_eleusis_dataset
from .data.glyphs import GLYPH_DIM
from .data.tabular import (BinaryTable, binarize_labels, ingest_csv, onehot_transform,
                           subsymbolize, synthetic_rule_table)
from .induction import InductionConfig, make_root, neuid3, train_tests
from .metrics import EvalReport, kfold_cv, mean_std, score
from .pool import PoolSpec, build_pool, make_test, neural_fact_pool, symbolic_pool
from .tree import predict

log = logging.getLogger(__name__)

EXPERIMENTS = ("uci_compare", "eleusis_compare", "pools", "reuse")
POOL_ORDER = ("bad", "nf", "opt_union", "opt")


@dataclass
class ExperimentSpec:
    experiment: str
    concepts: tuple = ("suit_order",)
    pool: str = "nf"
    seeds: tuple = tuple(range(7))
    folds: int = 10
    sizes: tuple = DESK_SIZES
    ranks: int = 8
    hidden_order: str = "disjunction"
    csv: str | None = None
    class_column: str | None = None
    onehot_d: int | None = None
    rule: str = "x0 if x1 else x2"
    rows: int = 200
    n_features: int = 8
    freeze_reused: bool = False
    induction: InductionConfig = field(default_factory=InductionConfig)
    baseline: baselines.BaselineConfig = field(default_factory=baselines.BaselineConfig)
    jobs: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        self.seeds = tuple(int(s) for s in self.seeds)
        self.concepts = tuple(self.concepts)
        self.sizes = tuple(self.sizes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("jobs")
        d["induction"].pop("jobs")
        return d


def _map(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(jobs) as ex:
        return list(ex.map(fn, items))


def _seeded(cfg: InductionConfig, seed: int) -> InductionConfig:
    return replace(cfg, seed=seed)


# --- tabular ---------------------------------------------------------------------------

def load_table(spec: ExperimentSpec, seed: int) -> BinaryTable:
    if spec.csv:
        ds = binarize_labels(ingest_csv(spec.csv, spec.class_column))
        return onehot_transform(ds, spec.onehot_d, seed)
    return synthetic_rule_table(spec.rows, seed, spec.n_features, spec.rule)


def tabular_runs(table: BinaryTable, train_idx, test_idx, seed: int, spec: ExperimentSpec,
                 renders=None) -> dict[str, dict]:
    """Scores of the four tabular models on one train/test split.

    ``renders`` is the pair (training rendering, test rendering) of the glyph
    version of ``table``; train rows come from the first, test rows from the
    second, so no image is shared between the splits.
    """
    if renders is None:
        renders = (subsymbolize(table, seed, "train"), subsymbolize(table, seed, "test"))
    y_train, y_test = table.labels[train_idx], table.labels[test_idx]
    sym = table.to_dataset()
    cfg = _seeded(spec.induction, seed)
    out = {}

    tree = neuid3(sym.subset(train_idx), symbolic_pool(table.names), cfg)
    out["nldt_symbolic"] = score(predict(tree, sym.subset(test_idx)), y_test, y_train)

    glyph_train = renders[0].subset(train_idx).without_facts()
    glyph_test = renders[1].subset(test_idx).without_facts()
    pool = neural_fact_pool(table.names, GLYPH_DIM, seed)
    tree = neuid3(glyph_train, pool, cfg)
    out["nldt_glyph"] = score(predict(tree, glyph_test), y_test, y_train)

    bcfg = replace(spec.baseline, seed=seed)
    model, _ = baselines.train_mlp(baselines.symbolic_view(table.X[train_idx], y_train), "symbolic", bcfg)
    out["mlp_symbolic"] = score(model.predict(baselines.symbolic_view(table.X[test_idx], y_test)),
                                y_test, y_train)
    model, _ = baselines.train_mlp(glyph_train, "subsymbolic", bcfg, keys=table.names)
    out["mlp_glyph"] = score(model.predict(glyph_test), y_test, y_train)
    return out


MODELS_TABULAR = ("nldt_symbolic", "nldt_glyph", "mlp_symbolic", "mlp_glyph")


def run_uci_compare(spec: ExperimentSpec) -> dict:
    reports = {m: EvalReport() for m in MODELS_TABULAR}

    def one_seed(seed):
        table = load_table(spec, seed)
        renders = (subsymbolize(table, seed, "train"), subsymbolize(table, seed, "test"))
        rows = []

        def pipeline(train_idx, test_idx, fold):
            rows.append((fold, tabular_runs(table, train_idx, test_idx, seed, spec, renders)))
            return np.zeros(len(test_idx), bool), table.labels[test_idx], table.labels[train_idx]

        kfold_cv(len(table.labels), table.labels, spec.folds, pipeline, seed)
        return seed, rows

    for seed, rows in _map(one_seed, spec.seeds, spec.jobs):
        for fold, res in rows:
            for m, metrics in res.items():
                reports[m].add(metrics, seed=seed, fold=fold)
    return {"models": {m: r.to_dict() for m, r in reports.items()}}


# --- cards -----------------------------------------------------------------------------

def eleusis_data(spec: ExperimentSpec, concept: str, seed: int):
    return make_eleusis_dataset(concept, seed, spec.sizes, spec.ranks, spec.hidden_order)


def nldt_on_cards(spec: ExperimentSpec, concept: str, pool_kind: str, seed: int, data=None,
                  pool=None):
    train, _, test = data or eleusis_data(spec, concept, seed)
    if pool is None:
        pool = build_pool(PoolSpec(pool_kind, concept), spec.ranks, seed)
    tree = neuid3(train, pool, _seeded(spec.induction, seed))
    return tree, score(predict(tree, test), test.labels, train.labels)


def run_eleusis_compare(spec: ExperimentSpec) -> dict:
    jobs = [(c, s) for c in spec.concepts for s in spec.seeds]

    def one(job):
        concept, seed = job
        data = eleusis_data(spec, concept, seed)
        _, nldt = nldt_on_cards(spec, concept, spec.pool, seed, data)
        model, _ = baselines.train_card_nn(data[0], replace(spec.baseline, seed=seed))
        nn = score(model.predict(data[2].without_facts()), data[2].labels, data[0].labels)
        return concept, seed, nldt, nn

    table = {c: {"nldt": EvalReport(), "nn": EvalReport()} for c in spec.concepts}
    for concept, seed, nldt, nn in _map(one, jobs, spec.jobs):
        table[concept]["nldt"].add(nldt, seed=seed)
        table[concept]["nn"].add(nn, seed=seed)
    return {"concepts": {c: {k: r.to_dict() for k, r in v.items()} for c, v in table.items()}}


def run_pools(spec: ExperimentSpec) -> dict:
    jobs = [(c, k, s) for c in spec.concepts for k in POOL_ORDER for s in spec.seeds]

    def one(job):
        concept, kind, seed = job
        return concept, kind, seed, nldt_on_cards(spec, concept, kind, seed)[1]

    reports = {c: {k: EvalReport() for k in POOL_ORDER} for c in spec.concepts}
    for concept, kind, seed, metrics in _map(one, jobs, spec.jobs):
        reports[concept][kind].add(metrics, seed=seed)
    out = {}
    for c, by_kind in reports.items():
        opt = by_kind["opt"].aggregate()
        ratios = {
            k: {m: (r.aggregate()[m][0] / opt[m][0] if opt[m][0] > 0 else float("nan"))
                for m in ("f1_pos", "f1_neg")}
            for k, r in by_kind.items()
        }
        out[c] = {"pools": {k: r.to_dict() for k, r in by_kind.items()}, "ratio_to_opt": ratios}
    return {"concepts": out}


def pretrained_test(spec: ExperimentSpec, concept: str, name: str, seed: int):
    """Test ``name`` trained on ``concept``'s training set.

    This is the clone a tree with the one-test pool would place at its root.
    """
    train, _, _ = eleusis_data(spec, concept, seed)
    cfg = _seeded(spec.induction, seed)
    trained = train_tests(make_root(train), [make_test(name, spec.ranks, seed)], cfg)[0]
    reused = trained.clone("reused")
    reused.frozen = spec.freeze_reused
    return reused


REUSE_CELLS = (("untrained", "untrained"), ("untrained", "trained"),
               ("trained", "untrained"), ("trained", "trained"))


def run_reuse(spec: ExperimentSpec) -> dict:
    """2x2 grid on hidden_order_simple: (rank test, suit test) pre-trained or not."""
    concept = "hidden_order_simple"

    def one(seed):
        rank_t = pretrained_test(spec, "rank_order", "gt_rank", seed)
        suit_t = pretrained_test(spec, "suit_order", "gt_suit", seed)
        data = eleusis_data(spec, concept, seed)
        cells = {}
        for rank_state, suit_state in REUSE_CELLS:
            pool = [rank_t if rank_state == "trained" else make_test("gt_rank", spec.ranks, seed),
                    suit_t if suit_state == "trained" else make_test("gt_suit", spec.ranks, seed)]
            cells[(rank_state, suit_state)] = nldt_on_cards(spec, concept, "opt", seed, data, pool)[1]
        return seed, cells

    grid = {cell: EvalReport() for cell in REUSE_CELLS}
    for seed, cells in _map(one, spec.seeds, spec.jobs):
        for cell, metrics in cells.items():
            grid[cell].add(metrics, seed=seed)
    return {"grid": {f"rank_{r}/suit_{s}": rep.to_dict() for (r, s), rep in grid.items()}}


RUNNERS = {
    "uci_compare": run_uci_compare,
    "eleusis_compare": run_eleusis_compare,
    "pools": run_pools,
    "reuse": run_reuse,
}


def run_experiment(spec: ExperimentSpec, out_dir=None) -> dict:
    """Run a protocol; with ``out_dir`` also write results.json and results.txt."""
    results = {"spec": spec.to_dict(), "results": RUNNERS[spec.experiment](spec)}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "results.json").write_text(json.dumps(results, sort_keys=True, indent=1) + "\n")
        (out / "results.txt").write_text(format_table(results))
    return results


# --- text tables -------------------------------------------------------------------------

def _cell(summary: dict, metric: str) -> str:
    s = summary.get(metric)
    return "-" if s is None else f"{s['mean']:.3f}±{s['std']:.3f}"


def _align(rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def format_table(results: dict) -> str:
    exp = results["spec"]["experiment"]
    res = results["results"]
    if exp == "uci_compare":
        rows = [["model", "accuracy", "default_accuracy", "f1_pos", "f1_neg"]]
        for m, rep in res["models"].items():
            rows.append([m] + [_cell(rep["summary"], k) for k in rows[0][1:]])
    elif exp == "eleusis_compare":
        rows = [["concept", "nn f1_pos", "nldt f1_pos", "nn f1_neg", "nldt f1_neg"]]
        for c, v in res["concepts"].items():
            rows.append([c, _cell(v["nn"]["summary"], "f1_pos"), _cell(v["nldt"]["summary"], "f1_pos"),
                         _cell(v["nn"]["summary"], "f1_neg"), _cell(v["nldt"]["summary"], "f1_neg")])
    elif exp == "pools":
        rows = [["concept", "pool", "f1_pos", "f1_neg", "ratio f1_pos", "ratio f1_neg"]]
        for c, v in res["concepts"].items():
            for k, rep in v["pools"].items():
                r = v["ratio_to_opt"][k]
                rows.append([c, k, _cell(rep["summary"], "f1_pos"), _cell(rep["summary"], "f1_neg"),
                             f"{r['f1_pos']:.3f}", f"{r['f1_neg']:.3f}"])
    else:
        rows = [["cell", "f1_pos", "f1_neg", "accuracy"]]
        for cell, rep in res["grid"].items():
            rows.append([cell] + [_cell(rep["summary"], k) for k in rows[0][1:]])
    return _align(rows)


def seeds_mean(report: dict, metric: str) -> float:
    return mean_std([r[metric] for r in report["runs"]])[0]
