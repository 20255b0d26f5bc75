"""Column-major RLE helpers matching the core evaluator's convention,
plus a decoder/encoder pair for the compressed COCO count strings
(5-bit varint with sign extension and delta coding from the third
count onward)."""
from __future__ import annotations

import numpy as np


def encode_counts(bits: np.ndarray) -> list[int]:
    """Column-major run lengths, leading zero-run first."""
    flat = np.asarray(bits, dtype=bool).ravel(order="F")
    counts: list[int] = []
    last = 0
    run = 0
    for v in flat:
        v = int(v)
        if v != last:
            counts.append(run)
            run = 0
            last = v
        run += 1
    counts.append(run)
    return counts


def decode_counts(counts: list[int], height: int, width: int) -> np.ndarray:
    if sum(counts) != height * width:
        raise ValueError(f"counts sum {sum(counts)} != {height}x{width}")
    vals = np.zeros(len(counts), dtype=bool)
    vals[1::2] = True
    flat = np.repeat(vals, counts)
    return flat.reshape((height, width), order="F")


def counts_from_string(s: str) -> list[int]:
    """Decode a compressed COCO count string to plain run lengths."""
    counts: list[int] = []
    p = 0
    while p < len(s):
        x = 0
        k = 0
        more = True
        while more:
            c = ord(s[p]) - 48
            x |= (c & 0x1F) << (5 * k)
            more = bool(c & 0x20)
            p += 1
            k += 1
            if not more and (c & 0x10):
                x |= -1 << (5 * k)
        if len(counts) > 2:
            x += counts[-2]
        counts.append(x)
    return counts


def counts_to_string(counts: list[int]) -> str:
    """Inverse of counts_from_string (used for round-trip checks)."""
    out: list[str] = []
    for i, value in enumerate(counts):
        x = value - counts[i - 2] if i > 2 else value
        more = True
        while more:
            c = x & 0x1F
            x >>= 5
            more = (x != -1) if (c & 0x10) else (x != 0)
            if more:
                c |= 0x20
            out.append(chr(c + 48))
    return "".join(out)
