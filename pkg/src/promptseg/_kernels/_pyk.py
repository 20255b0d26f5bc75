"""NumPy/SciPy kernel implementations (pure-Python fallback backend).

Every function here has a compiled twin in `_ck.pyx` with identical
semantics; the per-image pipeline calls whichever backend is active.
"""
from __future__ import annotations

import numpy as np
from scipy import ndimage

NAME = "python"

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


def label_components(bits: np.ndarray) -> tuple[np.ndarray, int]:
    """8-connected component labels, numbered by first row-major pixel.

    Returns (labels int32 (h, w) with 0 for background, count).
    """
    labels, count = ndimage.label(np.asarray(bits, dtype=bool), structure=_EIGHT_CONNECTED)
    labels = labels.astype(np.int32, copy=False)
    if count == 0:
        return labels, 0
    flat = labels.ravel()
    first = np.full(count + 1, flat.size, dtype=np.int64)
    nz = np.flatnonzero(flat)
    np.minimum.at(first, flat[nz], nz)
    order = np.argsort(first[1:], kind="stable")
    remap = np.zeros(count + 1, dtype=np.int32)
    remap[order + 1] = np.arange(1, count + 1, dtype=np.int32)
    return remap[labels], count


def masked_means(masks: np.ndarray, feats: np.ndarray) -> np.ndarray:
    """Per-row mean of `feats` over each flat mask; float64 accumulation.

    masks: (n, hw) bool/uint8; feats: (hw, c) float32. Rows with empty
    masks come back as zero vectors.
    """
    masks = np.asarray(masks)
    n = masks.shape[0]
    out = np.zeros((n, feats.shape[1]), dtype=np.float32)
    for k in range(n):
        rows = feats[masks[k] != 0]
        if rows.shape[0]:
            out[k] = (rows.sum(axis=0, dtype=np.float64) / rows.shape[0]).astype(np.float32)
    return out


def cascade_scan(
    masks: np.ndarray,
    bg: np.ndarray,
    sims: np.ndarray,
    tau_ioa: float,
    tau_f: float,
) -> np.ndarray:
    """Ledger scan over masks already sorted into processing order.

    Accepts mask k iff its not-yet-seen pixels are nonempty, their IoA
    with `bg` is < tau_ioa, and sims[k] < tau_f; accepted masks add
    their unseen pixels to the ledger.
    """
    masks = np.asarray(masks, dtype=bool)
    bg = np.asarray(bg, dtype=bool)
    n, hw = masks.shape
    seen = np.zeros(hw, dtype=bool)
    accepted = np.zeros(n, dtype=bool)
    for k in range(n):
        unseen = masks[k] & ~seen
        u = int(np.count_nonzero(unseen))
        if u == 0:
            continue
        inter = int(np.count_nonzero(unseen & bg))
        if inter / u < tau_ioa and sims[k] < tau_f:
            accepted[k] = True
            seen |= unseen
    return accepted


def merge_scan(
    masks: np.ndarray,
    feats: np.ndarray,
    embs: np.ndarray,
    tau_f: float,
    tau_ioa: float,
    use_f: bool,
    use_ioa: bool,
) -> tuple[np.ndarray, int]:
    """Sequential cluster merging over masks in processing order.

    Each mask joins every existing cluster whose mean-feature cosine
    exceeds tau_f (if use_f) or whose IoA (denominator: the incoming
    mask's area) exceeds tau_ioa (if use_ioa); all compatible clusters
    collapse with it into one new cluster whose embedding is recomputed
    from `feats` over the union.

    Returns (assign, m): assign[k] is the final cluster id of mask k,
    ids numbered by cluster creation order; m is the cluster count.
    """
    masks = np.asarray(masks, dtype=bool)
    n, hw = masks.shape
    masks_f = masks.astype(np.float32)
    areas = masks.sum(axis=1)

    slot_masks = np.zeros((n, hw), dtype=np.float32)
    slot_embs = np.zeros((n, feats.shape[1]), dtype=np.float64)
    slot_norms = np.zeros(n, dtype=np.float64)
    alive = np.zeros(n, dtype=bool)
    owner = np.full(n, -1, dtype=np.int32)
    n_slots = 0

    for k in range(n):
        p_emb = embs[k].astype(np.float64)
        p_norm = float(np.sqrt(p_emb @ p_emb))
        live = np.flatnonzero(alive[:n_slots])
        compatible = np.empty(0, dtype=np.int64)
        if live.size:
            ok = np.zeros(live.size, dtype=bool)
            if use_f:
                denom = slot_norms[live] * p_norm
                sims = np.zeros(live.size)
                nz = denom > 0.0
                sims[nz] = (slot_embs[live][nz] @ p_emb) / denom[nz]
                np.clip(sims, -1.0, 1.0, out=sims)
                ok |= sims > tau_f
            if use_ioa:
                inter = slot_masks[live] @ masks_f[k]
                ok |= inter / areas[k] > tau_ioa
            compatible = live[ok]

        slot = n_slots
        n_slots += 1
        if compatible.size == 0:
            slot_masks[slot] = masks_f[k]
            slot_embs[slot] = p_emb
            slot_norms[slot] = p_norm
        else:
            union = masks_f[k].copy()
            for s in compatible:
                np.maximum(union, slot_masks[s], out=union)
            alive[compatible] = False
            merged = np.isin(owner[:k], compatible)
            owner[:k][merged] = slot
            rows = feats[union != 0.0]
            emb = rows.sum(axis=0, dtype=np.float64) / rows.shape[0]
            slot_masks[slot] = union
            slot_embs[slot] = emb
            slot_norms[slot] = float(np.sqrt(emb @ emb))
        alive[slot] = True
        owner[k] = slot

    live = np.flatnonzero(alive[:n_slots])
    rank = np.full(n_slots, -1, dtype=np.int32)
    rank[live] = np.arange(live.size, dtype=np.int32)
    return rank[owner], int(live.size)


def rle_encode(flat: np.ndarray) -> np.ndarray:
    """Run lengths of a flat bit vector, alternating 0-runs and 1-runs.

    The first count is the leading zero run (0 when the vector starts
    with a 1); counts always sum to the vector length.
    """
    flat = np.asarray(flat, dtype=bool)
    n = flat.size
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], change, [n]))
    runs = np.diff(bounds).astype(np.int64)
    if flat[0]:
        runs = np.concatenate(([0], runs))
    return runs


def rle_decode(counts: np.ndarray, total: int) -> np.ndarray:
    """Inverse of rle_encode; caller validates sum(counts) == total."""
    counts = np.asarray(counts, dtype=np.int64)
    vals = np.zeros(counts.size, dtype=bool)
    vals[1::2] = True
    return np.repeat(vals, counts)
