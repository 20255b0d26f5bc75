"""Independent straight-line oracles the production code is checked against.

Everything here favors obviousness over speed: plain Python loops,
coordinate sets, and dictionaries, no shared helpers from the package
beyond the data types themselves.
"""
from __future__ import annotations

import math

import numpy as np

from promptseg.mask import BinaryMask


def mean_embedding_loop(values: np.ndarray, bits: np.ndarray) -> np.ndarray:
    h, w, c = values.shape
    acc = [0.0] * c
    count = 0
    for i in range(h):
        for j in range(w):
            if bits[i, j]:
                count += 1
                for k in range(c):
                    acc[k] += float(values[i, j, k])
    return np.array([a / count for a in acc], dtype=np.float64)


def cosine_loop(a, b) -> float:
    dot = sum(float(x) * float(y) for x, y in zip(a, b))
    na = math.sqrt(sum(float(x) ** 2 for x in a))
    nb = math.sqrt(sum(float(y) ** 2 for y in b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return max(-1.0, min(1.0, dot / (na * nb)))


def vote_loop(candidates: list[np.ndarray]) -> np.ndarray:
    """Per-pixel counting form of the majority vote."""
    h, w = candidates[0].shape
    out = np.zeros((h, w), dtype=bool)
    n = len(candidates)
    for i in range(h):
        for j in range(w):
            votes = sum(1 for cand in candidates if cand[i, j])
            out[i, j] = votes / n > 0.5
    return out


def _coords(bits: np.ndarray) -> set[tuple[int, int]]:
    return {(int(i), int(j)) for i, j in zip(*np.nonzero(bits))}


def cascade_transcription(proposals, bg_mask: BinaryMask, fm, tau_ioa: float, tau_f: float):
    """Straight-line ledger filter over coordinate sets.

    Same processing order as the production filter (area ascending,
    then origin row-major, then input index); returns the accepted
    proposals in acceptance order.
    """
    order = sorted(
        range(len(proposals)),
        key=lambda ix: (
            proposals[ix].mask.area,
            *(
                (0, proposals[ix].origin[0], proposals[ix].origin[1])
                if proposals[ix].origin is not None
                else (1, 0, 0)
            ),
            ix,
        ),
    )
    bg_set = _coords(bg_mask.bits)
    bg_ft = (
        mean_embedding_loop(fm.values, bg_mask.bits) if bg_set else None
    )
    seen: set[tuple[int, int]] = set()
    accepted = []
    for ix in order:
        fg = _coords(proposals[ix].mask.bits)
        unseen = fg - seen
        if not unseen:
            continue
        inter = len(unseen & bg_set)
        overlap = inter / len(unseen)
        if bg_ft is None:
            sim = 0.0
        else:
            fg_ft = mean_embedding_loop(fm.values, proposals[ix].mask.bits)
            sim = cosine_loop(fg_ft, bg_ft)
        if overlap < tau_ioa and sim < tau_f:
            seen |= unseen
            accepted.append(proposals[ix])
    return accepted


def merge_replay(proposals, fm, tau_f: float, tau_ioa: float, use_f: bool, use_ioa: bool):
    """Step-by-step replay of the merge definition on coordinate sets.

    Returns the final cluster pixel sets in creation order.
    """
    order = sorted(
        range(len(proposals)),
        key=lambda ix: (
            -proposals[ix].mask.area,
            *(
                (0, proposals[ix].origin[0], proposals[ix].origin[1])
                if proposals[ix].origin is not None
                else (1, 0, 0)
            ),
            ix,
        ),
    )
    h, w = proposals[0].mask.shape

    def set_embedding(pix: set[tuple[int, int]]) -> np.ndarray:
        bits = np.zeros((h, w), dtype=bool)
        for i, j in pix:
            bits[i, j] = True
        return mean_embedding_loop(fm.values, bits)

    clusters: list[dict] = []  # {"pix": set, "emb": np.ndarray, "created": int}
    step = 0
    for ix in order:
        step += 1
        fg = _coords(proposals[ix].mask.bits)
        fg_emb = set_embedding(fg)
        compatible = []
        for cl in clusters:
            hit = False
            if use_f and cosine_loop(fg_emb, cl["emb"]) > tau_f:
                hit = True
            if not hit and use_ioa and len(fg & cl["pix"]) / len(fg) > tau_ioa:
                hit = True
            if hit:
                compatible.append(cl)
        if not compatible:
            clusters.append({"pix": fg, "emb": fg_emb, "created": step})
            continue
        merged = set(fg)
        for cl in compatible:
            merged |= cl["pix"]
            clusters.remove(cl)
        clusters.append({"pix": merged, "emb": set_embedding(merged), "created": step})
    clusters.sort(key=lambda cl: cl["created"])
    return [cl["pix"] for cl in clusters]


def label_components_4conn(bits: np.ndarray) -> int:
    """Count of 4-connected components (contrast oracle for the 8-connected splitter)."""
    h, w = bits.shape
    seen = np.zeros((h, w), dtype=bool)
    count = 0
    for i in range(h):
        for j in range(w):
            if bits[i, j] and not seen[i, j]:
                count += 1
                stack = [(i, j)]
                seen[i, j] = True
                while stack:
                    y, x = stack.pop()
                    for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                        ny, nx = y + dy, x + dx
                        if 0 <= ny < h and 0 <= nx < w and bits[ny, nx] and not seen[ny, nx]:
                            seen[ny, nx] = True
                            stack.append((ny, nx))
    return count


def rle_encode_loop(flat) -> list[int]:
    counts = []
    last = 0
    run = 0
    for elem in flat:
        elem = int(bool(elem))
        if elem != last:
            counts.append(run)
            run = 0
            last = elem
        run += 1
    counts.append(run)
    return counts


def box_loop(bits: np.ndarray):
    ys, xs = [], []
    h, w = bits.shape
    for i in range(h):
        for j in range(w):
            if bits[i, j]:
                ys.append(i)
                xs.append(j)
    return (min(xs), min(ys), max(xs) - min(xs) + 1, max(ys) - min(ys) + 1)


def greedy_match_replay(ious: np.ndarray, det_order, thresh: float):
    """Direct replay of the greedy matching definition (ties: later GT wins)."""
    taken = set()
    out = []
    for d in det_order:
        best_iou = None
        best_g = None
        for g in range(ious.shape[1]):
            if g in taken:
                continue
            v = ious[d, g]
            if v < thresh:
                continue
            if best_iou is None or v >= best_iou:
                best_iou = v
                best_g = g
        if best_g is not None:
            taken.add(best_g)
        out.append(best_g)
    return out
