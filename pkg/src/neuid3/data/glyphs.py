"""8x8 noisy glyphs standing in for handwritten digit and letter images."""
from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

from ..errors import DataError

SIZE = 8
GLYPH_DIM = SIZE * SIZE
RANK_DIM = GLYPH_DIM
SUIT_DIM = GLYPH_DIM + 1  # plus one colour channel
NOISE_SIGMA = 0.15

# 6x6 strokes, placed with a one-pixel margin so jitter never clips them.
_STROKES = {
    "0": [".####.", "#....#", "#....#", "#....#", "#....#", ".####."],
    "1": ["..##..", ".###..", "..##..", "..##..", "..##..", ".####."],
    "2": [".####.", "#....#", "....#.", "..##..", ".#....", "######"],
    "3": ["#####.", ".....#", "..###.", ".....#", ".....#", "#####."],
    "4": ["#...#.", "#...#.", "######", "....#.", "....#.", "....#."],
    "5": ["######", "#.....", "#####.", ".....#", ".....#", "#####."],
    "6": ["...##.", "..#...", ".#....", "#####.", "#....#", ".####."],
    "7": ["######", ".....#", "....#.", "...#..", "..#...", "..#..."],
    "8": [".####.", "#....#", ".####.", "#....#", "#....#", ".####."],
    "9": [".####.", "#....#", "#....#", ".#####", ".....#", ".####."],
    "A": ["..##..", ".#..#.", "#....#", "######", "#....#", "#....#"],
    "B": ["#####.", "#....#", "#####.", "#....#", "#....#", "#####."],
    "C": [".#####", "#.....", "#.....", "#.....", "#.....", ".#####"],
    "D": ["####..", "#...#.", "#....#", "#....#", "#...#.", "####.."],
}
SYMBOLS = tuple(_STROKES)


def _template(symbol: str) -> np.ndarray:
    img = np.zeros((SIZE, SIZE))
    for r, row in enumerate(_STROKES[symbol]):
        for c, ch in enumerate(row):
            if ch == "#":
                img[r + 1, c + 1] = 1.0
    return img


TEMPLATES = {s: _template(s) for s in SYMBOLS}


def template(symbol: str) -> np.ndarray:
    """Clean template of ``symbol`` as a flat length-64 vector."""
    if symbol not in TEMPLATES:
        raise DataError(f"unknown glyph symbol {symbol!r}")
    return TEMPLATES[symbol].ravel().copy()


def shift(img: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """Translate a 2-D image, filling vacated pixels with zeros."""
    out = np.zeros_like(img)
    h, w = img.shape
    out[max(dy, 0):h + min(dy, 0), max(dx, 0):w + min(dx, 0)] = \
        img[max(-dy, 0):h + min(-dy, 0), max(-dx, 0):w + min(-dx, 0)]
    return out


def render_glyph(symbol: str, seed: int, sigma: float = NOISE_SIGMA, jitter: bool = True) -> np.ndarray:
    """Noisy, jittered rendering of ``symbol``; deterministic in ``(symbol, seed)``.

    With ``sigma=0`` and ``jitter=False`` the exact template is returned.
    """
    if symbol not in TEMPLATES:
        raise DataError(f"unknown glyph symbol {symbol!r}")
    rng = np.random.default_rng(seed)
    dy, dx = rng.integers(-1, 2, size=2) if jitter else (0, 0)
    img = shift(TEMPLATES[symbol], int(dy), int(dx))
    if sigma > 0:
        img = img + rng.normal(0.0, sigma, size=img.shape)
    return np.clip(img, 0.0, 1.0).ravel()


def nearest_template(pixels: np.ndarray, symbols=SYMBOLS) -> str:
    """Classify a glyph by squared distance to every template under every jitter."""
    img = np.asarray(pixels).reshape(SIZE, SIZE)
    best, best_d = None, np.inf
    for s in symbols:
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                d = float(((shift(TEMPLATES[s], dy, dx) - img) ** 2).sum())
                if d < best_d:
                    best, best_d = s, d
    return best


def read_idx_images(path) -> np.ndarray:
    """Read an IDX image archive (magic 0x00000803) as ``(n, rows*cols)`` in [0, 1].

    Lets real digit images replace the rendered glyphs; ``.gz`` files are
    decompressed transparently.
    """
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 16:
        raise DataError(f"{path}: truncated header")
    magic, n, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != 0x00000803:
        raise DataError(f"{path}: bad magic {magic:#010x}")
    body = np.frombuffer(raw, dtype=np.uint8, offset=16)
    if body.size != n * rows * cols:
        raise DataError(f"{path}: expected {n * rows * cols} pixels, found {body.size}")
    return body.reshape(n, rows * cols).astype(np.float64) / 255.0
