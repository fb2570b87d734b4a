"""Flat ``key = value`` configuration files."""
from __future__ import annotations

from .errors import ParseError


def parse_config(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment, blank lines are skipped."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip().strip('"').strip("'")
        if not sep or not key:
            raise ParseError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        if key in out:
            raise ParseError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def load_config(path) -> dict[str, str]:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), str(path))


def int_list(value: str) -> tuple[int, ...]:
    """``"0,1,2"`` or ``"0-2"`` or ``"0 1 2"`` to a tuple of ints."""
    value = value.strip()
    if "-" in value and "," not in value and " " not in value:
        lo, hi = value.split("-", 1)
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(v) for v in value.replace(",", " ").split())
