"""Iterative cluster merging of filtered proposals into instance masks."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import ConfigError, EmptyMask
from .feature_io import Embedding, FeatureMap, cosine_similarity, mean_embedding
from .mask import BinaryMask
from .prompting import MaskProposal
from .pruning import _ensure_embeddings, ioa


@dataclass
class MergeConfig:
    """Thresholds and switches for the two merge conditions."""

    tau_f: float = 0.1
    tau_ioa: float = 0.1
    enable_feature_condition: bool = True
    enable_ioa_condition: bool = True

    def __post_init__(self) -> None:
        if not (self.enable_feature_condition or self.enable_ioa_condition):
            raise ConfigError("at least one merge condition must be enabled")


@dataclass
class Cluster:
    """A union of merged proposal masks with its recomputed mean embedding."""

    mask: BinaryMask
    member_count: int
    embedding: Embedding


def should_merge(
    cluster: Cluster,
    proposal: MaskProposal,
    fm: FeatureMap,
    cfg: MergeConfig,
) -> bool:
    """OR of the enabled conditions: embedding cosine > tau_f, or IoA of
    the (smaller) proposal mask against the cluster mask > tau_ioa."""
    proposal.mask.check_same_shape(cluster.mask)
    if cfg.enable_ioa_condition and ioa(proposal.mask, cluster.mask) > cfg.tau_ioa:
        return True
    if cfg.enable_feature_condition:
        emb = proposal.embedding
        if emb is None:
            emb = mean_embedding(fm, proposal.mask)
        if cosine_similarity(emb, cluster.embedding) > cfg.tau_f:
            return True
    return False


def merge_all(
    proposals: Sequence[MaskProposal],
    fm: FeatureMap,
    cfg: MergeConfig,
) -> list[Cluster]:
    """Merge proposals in descending area order into clusters.

    Each proposal absorbs every existing compatible cluster (per
    should_merge, compared against the proposal's own pre-merge
    embedding) into one new cluster whose embedding is recomputed over
    the union mask; with no compatible cluster it starts a new one.
    Clusters come back in creation order.
    """
    if not proposals:
        return []
    for p in proposals:
        p.mask.check_same_shape(proposals[0].mask)
        if p.mask.area == 0:
            raise EmptyMask("cannot merge an empty proposal mask")

    order = sorted(
        range(len(proposals)),
        key=lambda ix: (-proposals[ix].mask.area, *proposals[ix].origin_key(), ix),
    )
    _ensure_embeddings(proposals, fm)
    masks = np.stack([proposals[ix].mask.bits.reshape(-1) for ix in order])
    embs = np.stack([proposals[ix].embedding for ix in order]).astype(np.float32)
    assign, count = _kernels.active().merge_scan(
        masks,
        fm.flat(),
        embs,
        cfg.tau_f,
        cfg.tau_ioa,
        cfg.enable_feature_condition,
        cfg.enable_ioa_condition,
    )

    h, w = proposals[0].mask.shape
    union_bits = np.zeros((count, h * w), dtype=bool)
    members = np.zeros(count, dtype=np.int64)
    for pos, cid in enumerate(assign):
        union_bits[cid] |= masks[pos]
        members[cid] += 1
    cluster_embs = _kernels.active().masked_means(union_bits, fm.flat())
    return [
        Cluster(BinaryMask(union_bits[cid].reshape(h, w)), int(members[cid]), cluster_embs[cid])
        for cid in range(count)
    ]


def finalize(
    clusters: Sequence[Cluster],
    min_area_fraction: float | None = None,
) -> list[BinaryMask]:
    """Cluster masks in order, optionally dropping areas below
    min_area_fraction * h * w."""
    masks = [c.mask for c in clusters]
    if min_area_fraction is None:
        return masks
    return [
        m for m in masks if m.area >= min_area_fraction * m.height * m.width
    ]
