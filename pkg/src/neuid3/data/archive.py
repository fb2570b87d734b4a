"""Dataset archive directories: meta.json plus one JSON-lines file per split."""
from __future__ import annotations

import json
from pathlib import Path

from ..dataset import Dataset, load_split
from ..errors import DataError

SPLITS = ("train", "val", "test")


def write_archive(directory, splits: dict[str, Dataset], meta: dict) -> Path:
    """Write ``meta.json`` and ``<split>.jsonl``; output depends only on the inputs."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    meta = dict(meta, sizes={k: len(v) for k, v in splits.items()})
    (out / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    for name, ds in splits.items():
        ds.to_jsonl(out / f"{name}.jsonl")
    return out


def read_meta(directory) -> dict:
    path = Path(directory) / "meta.json"
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataError(f"{directory} is not a dataset archive (no meta.json)") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: line {exc.lineno}: {exc.msg}") from None


def read_archive(directory) -> tuple[dict, dict[str, Dataset]]:
    meta = read_meta(directory)
    splits = {s: load_split(directory, s) for s in SPLITS if (Path(directory) / f"{s}.jsonl").exists()}
    return meta, splits
