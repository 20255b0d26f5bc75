"""Background aggregation by pixel-wise voting and foreground filtering.

Three filters are provided: the ledger-based cascade filter (default)
plus the two simpler overlap-only and similarity-only variants used for
ablations.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import DimMismatch, EmptyFirstMask
from .feature_io import FeatureMap, cosine_similarity, mean_embedding
from .mask import BinaryMask
from .prompting import MaskProposal


@dataclass
class VotedBackground:
    """Majority-vote aggregate of background candidates; `support` = |candidates|."""

    mask: BinaryMask
    support: int


@dataclass(frozen=True)
class Cascade:
    tau_ioa: float = 0.8
    tau_f: float = 0.1


@dataclass(frozen=True)
class IoAOnly:
    tau: float = 0.5


@dataclass(frozen=True)
class SimilarityOnly:
    tau: float = 0.0


FilterStrategy = Cascade | IoAOnly | SimilarityOnly


def vote_background(
    candidates: Sequence[BinaryMask],
    shape: tuple[int, int] | None = None,
) -> VotedBackground:
    """Pixel is set iff strictly more than half the candidates set it.

    An empty candidate list yields an empty mask (`shape` is required
    then to size it).
    """
    if not candidates:
        if shape is None:
            raise ValueError("shape required when there are no candidates")
        return VotedBackground(BinaryMask.zeros(*shape), 0)
    first = candidates[0]
    votes = np.zeros(first.shape, dtype=np.int32)
    for m in candidates:
        first.check_same_shape(m)
        votes += m.bits
    # integer form of the strict majority test: votes/n > 0.5
    return VotedBackground(BinaryMask(2 * votes > len(candidates)), len(candidates))


def ioa(a: BinaryMask, b: BinaryMask) -> float:
    """Intersection-over-Area: |a & b| / |a| (first argument's area)."""
    a.check_same_shape(b)
    if a.area == 0:
        raise EmptyFirstMask("IoA denominator mask is empty")
    return a.intersection_area(b) / a.area


def _ensure_embeddings(proposals: Sequence[MaskProposal], fm: FeatureMap) -> None:
    missing = [p for p in proposals if p.embedding is None]
    if not missing:
        return
    flat = np.stack([p.mask.bits.reshape(-1) for p in missing])
    embs = _kernels.active().masked_means(flat, fm.flat())
    for p, e in zip(missing, embs):
        p.embedding = e


def _check_dims(proposals: Sequence[MaskProposal], bg: VotedBackground, fm: FeatureMap) -> None:
    if bg.mask.shape != (fm.height, fm.width):
        raise DimMismatch(
            f"background shape {bg.mask.shape} does not match features "
            f"{fm.height}x{fm.width}"
        )
    for p in proposals:
        p.mask.check_same_shape(bg.mask)


def cascade_filter(
    proposals: Sequence[MaskProposal],
    bg: VotedBackground,
    fm: FeatureMap,
    tau_ioa_bg: float = 0.8,
    tau_f_bg: float = 0.1,
) -> list[MaskProposal]:
    """Sequentially accept proposals by what their unseen pixels add.

    Proposals are processed in ascending area order (ties: origin
    row-major, then input index). A proposal is accepted iff its pixels
    not covered by previously accepted proposals are nonempty, their IoA
    with the voted background is < tau_ioa_bg, and the cosine similarity
    between the full proposal's mean embedding and the background's is
    < tau_f_bg. Accepted proposals are returned with their original
    masks, in acceptance order. An empty background makes both terms 0.
    """
    _check_dims(proposals, bg, fm)
    if not proposals:
        return []
    order = sorted(
        range(len(proposals)),
        key=lambda ix: (proposals[ix].mask.area, *proposals[ix].origin_key(), ix),
    )
    _ensure_embeddings(proposals, fm)
    masks = np.stack([proposals[ix].mask.bits.reshape(-1) for ix in order])
    sims = np.zeros(len(order), dtype=np.float64)
    if bg.mask.area > 0:
        bg_emb = mean_embedding(fm, bg.mask)
        for pos, ix in enumerate(order):
            sims[pos] = cosine_similarity(proposals[ix].embedding, bg_emb)
    accepted = _kernels.active().cascade_scan(
        masks, bg.mask.bits.reshape(-1), sims, tau_ioa_bg, tau_f_bg
    )
    return [proposals[ix] for pos, ix in enumerate(order) if accepted[pos]]


def ioa_only_filter(
    proposals: Sequence[MaskProposal],
    bg: VotedBackground,
    tau: float = 0.5,
) -> list[MaskProposal]:
    """Keep proposals whose IoA with the voted background is <= tau."""
    for p in proposals:
        p.mask.check_same_shape(bg.mask)
    return [p for p in proposals if ioa(p.mask, bg.mask) <= tau]


def similarity_only_filter(
    proposals: Sequence[MaskProposal],
    bg: VotedBackground,
    fm: FeatureMap,
    tau: float = 0.0,
) -> list[MaskProposal]:
    """Keep proposals whose embedding cosine with the background is <= tau.

    An empty voted background keeps everything.
    """
    _check_dims(proposals, bg, fm)
    if bg.mask.area == 0:
        return list(proposals)
    _ensure_embeddings(proposals, fm)
    bg_emb = mean_embedding(fm, bg.mask)
    return [p for p in proposals if cosine_similarity(p.embedding, bg_emb) <= tau]


def apply_filter(
    proposals: Sequence[MaskProposal],
    bg: VotedBackground,
    fm: FeatureMap,
    strategy: FilterStrategy,
) -> list[MaskProposal]:
    if isinstance(strategy, Cascade):
        return cascade_filter(proposals, bg, fm, strategy.tau_ioa, strategy.tau_f)
    if isinstance(strategy, IoAOnly):
        return ioa_only_filter(proposals, bg, strategy.tau)
    return similarity_only_filter(proposals, bg, fm, strategy.tau)
