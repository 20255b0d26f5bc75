"""Binary pixel masks with a cached area."""
from __future__ import annotations

import numpy as np

from .errors import DimMismatch


class BinaryMask:
    """A height x width bitmap. `area` caches the popcount of `bits`.

    Treated as immutable after construction; callers must not write to
    `bits` afterwards.
    """

    __slots__ = ("bits", "area")

    def __init__(self, bits: np.ndarray) -> None:
        bits = np.ascontiguousarray(bits, dtype=bool)
        if bits.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {bits.shape}")
        self.bits = bits
        self.area = int(np.count_nonzero(bits))

    @classmethod
    def zeros(cls, height: int, width: int) -> "BinaryMask":
        return cls(np.zeros((height, width), dtype=bool))

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape

    def is_empty(self) -> bool:
        return self.area == 0

    def union(self, other: "BinaryMask") -> "BinaryMask":
        self.check_same_shape(other)
        return BinaryMask(self.bits | other.bits)

    def intersection_area(self, other: "BinaryMask") -> int:
        self.check_same_shape(other)
        return int(np.count_nonzero(self.bits & other.bits))

    def check_same_shape(self, other: "BinaryMask") -> None:
        if self.shape != other.shape:
            raise DimMismatch(f"mask shapes differ: {self.shape} vs {other.shape}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.bits, other.bits))

    def __repr__(self) -> str:
        return f"BinaryMask({self.height}x{self.width}, area={self.area})"


def union_all(masks: "list[BinaryMask]", shape: tuple[int, int] | None = None) -> BinaryMask:
    """Union of a list of same-shape masks; `shape` is required when the list is empty."""
    if not masks:
        if shape is None:
            raise ValueError("shape required for an empty mask list")
        return BinaryMask.zeros(*shape)
    acc = masks[0].bits.copy()
    for m in masks[1:]:
        masks[0].check_same_shape(m)
        acc |= m.bits
    return BinaryMask(acc)
