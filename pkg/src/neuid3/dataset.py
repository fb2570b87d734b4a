"""Labelled examples with symbolic facts and subsymbolic feature vectors."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, MissingFeatureError

POS, NEG = "pos", "neg"


@dataclass
class Example:
    symbolic_facts: frozenset = frozenset()
    features: dict = field(default_factory=dict)
    label: bool = True

    def __post_init__(self):
        self.symbolic_facts = frozenset(self.symbolic_facts)
        self.features = {k: np.asarray(v, dtype=np.float64) for k, v in self.features.items()}
        self.label = _parse_label(self.label)


def _parse_label(label) -> bool:
    if isinstance(label, str):
        if label not in (POS, NEG):
            raise DataError(f"label must be 'pos' or 'neg', got {label!r}")
        return label == POS
    return bool(label)


class _HiddenFacts:
    """Stand-in for symbolic facts on datasets handed to neural baselines."""

    def __getitem__(self, i):
        raise PermissionError("symbolic ground truth is not available on this view")

    def __iter__(self):
        raise PermissionError("symbolic ground truth is not available on this view")

    def __len__(self):
        raise PermissionError("symbolic ground truth is not available on this view")


class Dataset:
    """Column-oriented batch of examples.

    ``features[key]`` is an ``(n, d)`` float array, ``facts[i]`` the set of
    true atoms of example ``i`` and ``labels`` a boolean array (True = pos).
    """

    def __init__(self, features: dict, labels, facts: Sequence[Iterable[str]] | None = None):
        self.labels = np.asarray(labels, dtype=bool).reshape(-1)
        n = len(self.labels)
        self.features = {}
        for k, v in features.items():
            arr = np.asarray(v, dtype=np.float64)
            if arr.ndim == 1:
                arr = arr.reshape(n, -1)
            if arr.ndim != 2 or arr.shape[0] != n:
                raise DataError(f"feature {k!r} has shape {arr.shape}, expected ({n}, d)")
            self.features[k] = arr
        if facts is None:
            facts = [()] * n
        self.facts = [frozenset(f) for f in facts]
        if len(self.facts) != n:
            raise DataError("facts and labels differ in length")

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, i) -> Example:
        return Example(self.facts[i], {k: v[i] for k, v in self.features.items()}, bool(self.labels[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def feature(self, key: str) -> np.ndarray:
        try:
            return self.features[key]
        except KeyError:
            raise MissingFeatureError(f"feature {key!r} not present") from None

    def fact_column(self, atom: str) -> np.ndarray:
        return np.fromiter((atom in f for f in self.facts), dtype=bool, count=len(self))

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        if idx.dtype == bool:
            idx = np.flatnonzero(idx)
        elif idx.size == 0:
            idx = idx.astype(np.intp)
        facts = self.facts
        sub_facts = None if isinstance(facts, _HiddenFacts) else [facts[i] for i in idx]
        ds = Dataset({k: v[idx] for k, v in self.features.items()}, self.labels[idx], sub_facts)
        if sub_facts is None:
            ds.facts = _HiddenFacts()
        return ds

    def without_facts(self) -> "Dataset":
        """View exposing only features and labels; reading facts raises."""
        ds = Dataset(self.features, self.labels)
        ds.facts = _HiddenFacts()
        return ds

    @classmethod
    def from_examples(cls, examples: Sequence[Example]) -> "Dataset":
        examples = list(examples)
        keys = sorted(examples[0].features) if examples else []
        feats = {k: np.stack([e.features[k] for e in examples]) for k in keys}
        return cls(feats, [e.label for e in examples], [e.symbolic_facts for e in examples])

    @classmethod
    def concat(cls, parts: Sequence["Dataset"]) -> "Dataset":
        keys = sorted(parts[0].features)
        feats = {k: np.concatenate([p.features[k] for p in parts]) for k in keys}
        labels = np.concatenate([p.labels for p in parts])
        facts = [f for p in parts for f in p.facts]
        return cls(feats, labels, facts)

    # --- jsonl ------------------------------------------------------------

    def to_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for i in range(len(self)):
                row = {
                    "facts": sorted(self.facts[i]),
                    "features": {k: [float(x) for x in v[i]] for k, v in sorted(self.features.items())},
                    "label": POS if self.labels[i] else NEG,
                }
                fh.write(json.dumps(row, sort_keys=True) + "\n")

    @classmethod
    def from_jsonl(cls, path) -> "Dataset":
        rows = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if line.strip():
                    try:
                        rows.append(json.loads(line))
                    except json.JSONDecodeError as exc:
                        raise DataError(f"{path}:{lineno}: {exc}") from None
        if not rows:
            return cls({}, np.zeros(0, dtype=bool), [])
        keys = sorted(rows[0]["features"])
        feats = {k: np.array([r["features"][k] for r in rows], dtype=np.float64) for k in keys}
        return cls(feats, [_parse_label(r["label"]) for r in rows], [r["facts"] for r in rows])


def load_split(directory, split: str) -> Dataset:
    path = Path(directory) / f"{split}.jsonl"
    if not path.exists():
        raise DataError(f"missing {path}")
    return Dataset.from_jsonl(path)
