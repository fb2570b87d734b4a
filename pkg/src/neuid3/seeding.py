"""Deterministic seed fan-out.

Sub-seeds depend only on the parent seed and a label, never on scheduling
order, so concurrent work reproduces sequential results bit for bit.
"""
import zlib

_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def derive_seed(seed: int, *labels) -> int:
    """Mix ``seed`` with each label in turn; returns a 63-bit seed."""
    x = int(seed) & _MASK
    for label in labels:
        x = splitmix64(x ^ zlib.crc32(str(label).encode("utf-8")))
    return x >> 1
