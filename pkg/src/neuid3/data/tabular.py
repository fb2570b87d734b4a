"""Tabular data: CSV ingestion, binary labels, one-hot binarisation, glyphs."""
from __future__ import annotations

import csv
import logging
import re
import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ..dataset import Dataset
from ..errors import DataError
from ..seeding import derive_seed
from .glyphs import render_glyph

log = logging.getLogger(__name__)

MISSING = ("", "?", "NA", "nan", "NaN")


@dataclass
class TabularDataset:
    columns: list[str]
    types: dict[str, str]            # numeric | categorical | binary
    data: dict[str, list]
    target: list
    class_column: str
    dropped_rows: int = 0
    labels: np.ndarray | None = None  # True = pos, set by binarize_labels

    def __len__(self):
        return len(self.target)


def _to_float(s: str):
    try:
        return float(s)
    except ValueError:
        return None


def _infer_type(values) -> str:
    nums = [_to_float(v) for v in values]
    if any(x is None for x in nums):
        return "categorical"
    if set(nums) <= {0.0, 1.0}:
        return "binary"
    return "numeric"


def ingest_csv(path, class_column: str, delimiter: str = ",") -> TabularDataset:
    """Read a delimited file with a header row.

    Rows with a missing cell are dropped (count kept in ``dropped_rows``).
    A column is numeric when every value parses as a number, binary when
    those numbers are all 0/1, otherwise categorical.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh, delimiter=delimiter))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    if not rows:
        raise DataError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    if class_column not in header:
        raise DataError(f"class column {class_column!r} not in header {header}")
    body, dropped = [], 0
    for row in rows[1:]:
        if not row or all(not c.strip() for c in row):
            continue
        cells = [c.strip() for c in row]
        if len(cells) != len(header) or any(c in MISSING for c in cells):
            dropped += 1
            continue
        body.append(cells)
    if not body:
        raise DataError(f"{path} has no complete rows")
    if dropped:
        log.info("dropped %d incomplete rows from %s", dropped, path)
    ci = header.index(class_column)
    columns = [h for h in header if h != class_column]
    data, types = {}, {}
    for j, h in enumerate(header):
        if h == class_column:
            continue
        raw = [r[j] for r in body]
        types[h] = _infer_type(raw)
        data[h] = raw if types[h] == "categorical" else [float(v) for v in raw]
    return TabularDataset(columns, types, data, [r[ci] for r in body], class_column, dropped)


def binarize_labels(ds: TabularDataset) -> TabularDataset:
    """Most frequent class is positive; ties go to the lexicographically first."""
    counts = Counter(ds.target)
    if len(counts) == 1:
        warnings.warn("dataset has a single class; every example is positive")
    pos_class = min(counts, key=lambda c: (-counts[c], str(c)))
    ds.labels = np.array([t == pos_class for t in ds.target], dtype=bool)
    return ds


def _entropy(y) -> float:
    n = len(y)
    if n == 0:
        return 0.0
    p = float(np.sum(y)) / n
    if p in (0.0, 1.0):
        return 0.0
    return -(p * np.log2(p) + (1 - p) * np.log2(1 - p))


def best_split(x, y):
    """Threshold minimising the size-weighted entropy of the two sides.

    Candidates are midpoints between consecutive distinct values; ties keep
    the smallest threshold. Returns ``None`` for a constant column.
    """
    order = np.argsort(x, kind="stable")
    xs, ys = np.asarray(x, dtype=float)[order], np.asarray(y, dtype=float)[order]
    n = len(xs)
    cum_pos = np.cumsum(ys)
    total_pos = cum_pos[-1] if n else 0.0
    best, best_h = None, np.inf
    for i in range(n - 1):
        if xs[i] == xs[i + 1]:
            continue
        nl = i + 1
        pl = cum_pos[i] / nl
        pr = (total_pos - cum_pos[i]) / (n - nl)
        h = (nl * _h(pl) + (n - nl) * _h(pr)) / n
        if h < best_h - 1e-12:
            best, best_h = (xs[i] + xs[i + 1]) / 2.0, h
    return best


def _h(p):
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -(p * np.log2(p) + (1 - p) * np.log2(1 - p))


def entropy_bins(x, y, d: int) -> list[float]:
    """Greedy recursive entropy binning into at most ``d`` bins.

    The highest-entropy bin that can still be split is split at its best
    threshold until ``d`` bins exist. Returns the sorted thresholds.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=bool)
    thresholds: list[float] = []
    while len(thresholds) < d - 1:
        edges = [-np.inf] + thresholds + [np.inf]
        bins = []
        for lo, hi in zip(edges[:-1], edges[1:]):
            mask = (x > lo) & (x <= hi)
            bins.append((-_entropy(y[mask]), -int(mask.sum()), lo, mask))
        bins.sort(key=lambda b: b[:3])
        for _, _, _, mask in bins:
            t = best_split(x[mask], y[mask])
            if t is not None:
                thresholds = sorted(thresholds + [t])
                break
        else:
            break
    return thresholds


def _ident(name: str) -> str:
    s = re.sub(r"[^A-Za-z0-9_]", "_", str(name))
    return s if re.match(r"[A-Za-z_]", s) else "c_" + s


@dataclass
class BinaryTable:
    names: list[str]
    X: np.ndarray              # (n, m) of 0/1
    labels: np.ndarray
    groups: dict[str, list[str]] = field(default_factory=dict)

    def to_dataset(self) -> Dataset:
        facts = [{n for n, v in zip(self.names, row) if v} for row in self.X]
        return Dataset({}, self.labels, facts)


def onehot_transform(ds: TabularDataset, d: int | None = None, seed: int = 0) -> BinaryTable:
    """Turn every non-binary column into ``d`` binary columns.

    Numeric columns are entropy-binned against the label and one-hot
    encoded; categorical values are randomly (seeded) spread over ``d``
    groups; binary columns pass through. ``d`` defaults to a seeded draw
    from 2..4.
    """
    if ds.labels is None:
        binarize_labels(ds)
    rng = np.random.default_rng(derive_seed(seed, "onehot"))
    if d is None:
        d = int(rng.integers(2, 5))
    if not 2 <= d <= 4:
        raise ValueError(f"d must be in [2, 4], got {d}")
    names, cols, groups = [], [], {}
    y = ds.labels
    for c in ds.columns:
        base = _ident(c)
        kind = ds.types[c]
        if kind == "binary":
            names.append(base)
            cols.append(np.asarray(ds.data[c], dtype=float) == 1.0)
            groups[c] = [base]
            continue
        block = np.zeros((len(ds), d), dtype=bool)
        if kind == "numeric":
            x = np.asarray(ds.data[c], dtype=float)
            thr = entropy_bins(x, y, d)
            if not thr:
                warnings.warn(f"column {c!r} is constant; using a single bin")
            block[np.arange(len(x)), np.searchsorted(thr, x, side="left")] = True
        else:
            values = sorted(set(ds.data[c]))
            perm = rng.permutation(len(values))
            group_of = {values[p]: i % d for i, p in enumerate(perm)}
            for i, v in enumerate(ds.data[c]):
                block[i, group_of[v]] = True
        col_names = [f"{base}_{j}" for j in range(d)]
        names += col_names
        cols += list(block.T)
        groups[c] = col_names
    X = np.stack(cols, axis=1).astype(np.int8) if cols else np.zeros((len(ds), 0), np.int8)
    return BinaryTable(names, X, y.copy(), groups)


def subsymbolize(table: BinaryTable, renderer_seed: int, split: str = "train") -> Dataset:
    """Replace every binary value by a noisy glyph of ``1`` or ``0``.

    Training and test renders use disjoint seed ranges (even vs odd seeds).
    The symbolic values stay available as facts for oracle checks only.
    """
    if not np.isin(table.X, (0, 1)).all():
        raise DataError("subsymbolize needs binary features")
    bit = {"train": 0, "val": 0, "test": 1}[split]
    base = derive_seed(renderer_seed, "glyphs", split) >> 24
    n, m = table.X.shape
    feats = {}
    for j, name in enumerate(table.names):
        imgs = np.empty((n, 64))
        for i in range(n):
            seed = ((base + i * m + j) << 1) | bit
            imgs[i] = render_glyph("1" if table.X[i, j] else "0", seed)
        feats[name] = imgs
    ds = table.to_dataset()
    return Dataset(feats, ds.labels, ds.facts)


def synthetic_rule_table(n: int, seed: int, n_features: int = 8, rule: str = "x0 if x1 else x2") -> BinaryTable:
    """Random binary features labelled by a Python boolean expression over ``x0..``."""
    rng = np.random.default_rng(derive_seed(seed, "synthetic", rule))
    X = rng.integers(0, 2, size=(n, n_features)).astype(np.int8)
    try:
        code = compile(rule, "<rule>", "eval")
        labels = np.array([bool(eval(code, {}, {f"x{j}": bool(v) for j, v in enumerate(row)})) for row in X])
    except (SyntaxError, NameError) as exc:
        raise DataError(f"bad rule {rule!r} over {n_features} features: {exc}") from None
    names = [f"x{j}" for j in range(n_features)]
    return BinaryTable(names, X, labels, {nm: [nm] for nm in names})
