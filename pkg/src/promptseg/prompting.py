"""Point-prompting: seed selection, affinity maps, bipartition, and the
initial foreground/background split of mask proposals.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import InvalidStride, KTooLarge, OutOfBounds
from .feature_io import Embedding, FeatureMap
from .mask import BinaryMask

# h x w float32 array of clamped similarities in [-1, 1].
AffinityMap = np.ndarray


@dataclass(frozen=True)
class RegularGrid:
    """Seeds on a 2D grid anchored at (0, 0), one every `stride` patches."""

    stride: int = 4


@dataclass(frozen=True)
class RandomPrompts:
    """`count` distinct seeds sampled uniformly without replacement."""

    count: int = 225
    seed: int = 0


PromptStrategy = RegularGrid | RandomPrompts


@dataclass
class MaskProposal:
    """A feature-resolution mask plus the prompt coordinate that spawned it.

    `origin` is None for synthetic proposals. `embedding` is the mean
    feature vector over the mask, filled in lazily by the stages that
    need it.
    """

    mask: BinaryMask
    origin: tuple[int, int] | None = None
    embedding: Embedding | None = field(default=None, repr=False)

    def origin_key(self) -> tuple[int, int, int]:
        """Row-major sort key; synthetic origins order after grid ones."""
        if self.origin is None:
            return (1, 0, 0)
        return (0, self.origin[0], self.origin[1])


def grid_prompts(h: int, w: int, stride: int) -> list[tuple[int, int]]:
    """Row-major grid coordinates {0, stride, 2*stride, ...} x likewise."""
    if stride < 1 or stride > min(h, w):
        raise InvalidStride(f"stride {stride} outside [1, {min(h, w)}] for {h}x{w}")
    return [(i, j) for i in range(0, h, stride) for j in range(0, w, stride)]


def random_prompts(h: int, w: int, count: int, seed: int) -> list[tuple[int, int]]:
    """`count` distinct coordinates, reproducible for a fixed seed."""
    if count < 1:
        raise KTooLarge(f"prompt count must be >= 1, got {count}")
    if count > h * w:
        raise KTooLarge(f"cannot draw {count} distinct prompts from {h}x{w}")
    rng = np.random.default_rng(seed)
    flat = rng.choice(h * w, size=count, replace=False)
    return [(int(f) // w, int(f) % w) for f in flat]


def prompt_coords(h: int, w: int, strategy: PromptStrategy) -> list[tuple[int, int]]:
    if isinstance(strategy, RegularGrid):
        return grid_prompts(h, w, strategy.stride)
    return random_prompts(h, w, strategy.count, strategy.seed)


def affinity(fm: FeatureMap, prompt: tuple[int, int]) -> AffinityMap:
    """Dot products between the prompt's patch vector and every patch.

    `fm` must already be L2-normalized, making this the cosine
    similarity; values are clamped to [-1, 1].
    """
    i, j = prompt
    if not (0 <= i < fm.height and 0 <= j < fm.width):
        raise OutOfBounds(f"prompt {prompt} outside {fm.height}x{fm.width}")
    a = fm.flat() @ fm.values[i, j]
    np.clip(a, -1.0, 1.0, out=a)
    return a.reshape(fm.height, fm.width)


def bipartition(a: AffinityMap, tau_b: float) -> BinaryMask:
    """Threshold an affinity map with a strict `> tau_b` cut."""
    return BinaryMask(np.asarray(a) > tau_b)


def classify_background(mask: BinaryMask) -> bool:
    """True iff at least two borders hold strictly more than half their pixels.

    The four sides are the full top/bottom rows (length = width) and the
    full left/right columns (length = height); corners count once per side.
    """
    b = mask.bits
    h, w = mask.shape
    saturated = 0
    if 2 * int(np.count_nonzero(b[0, :])) > w:
        saturated += 1
    if 2 * int(np.count_nonzero(b[h - 1, :])) > w:
        saturated += 1
    if 2 * int(np.count_nonzero(b[:, 0])) > h:
        saturated += 1
    if 2 * int(np.count_nonzero(b[:, w - 1])) > h:
        saturated += 1
    return saturated >= 2


def split_connected_components(mask: BinaryMask) -> list[BinaryMask]:
    """Maximal 8-connected components, ordered by first row-major pixel."""
    if mask.area == 0:
        return []
    labels, count = _kernels.active().label_components(mask.bits)
    return [BinaryMask(labels == k) for k in range(1, count + 1)]


def generate_proposals(
    fm: FeatureMap,
    strategy: PromptStrategy,
    tau_b: float,
) -> tuple[list[MaskProposal], list[BinaryMask]]:
    """Prompt, bipartition, and split the feature map into proposals.

    Returns (foreground proposals, background candidates). Empty masks
    are dropped; background-classified masks are kept whole while
    foreground masks contribute one proposal per connected component.
    `fm` must be L2-normalized.
    """
    h, w = fm.height, fm.width
    coords = prompt_coords(h, w, strategy)
    flat = fm.flat()
    rows = np.array([i * w + j for i, j in coords], dtype=np.int64)
    aff = flat @ flat[rows].T  # (hw, K)
    np.clip(aff, -1.0, 1.0, out=aff)

    foreground: list[MaskProposal] = []
    background: list[BinaryMask] = []
    for k, (i, j) in enumerate(coords):
        mask = BinaryMask((aff[:, k] > tau_b).reshape(h, w))
        if mask.area == 0:
            continue
        if classify_background(mask):
            background.append(mask)
        else:
            foreground.extend(
                MaskProposal(comp, origin=(i, j))
                for comp in split_connected_components(mask)
            )
    return foreground, background
