"""Feature-map data model, its on-disk codec, and embedding arithmetic.

File layout (PMFM, little-endian throughout):

    bytes  0-3   magic "PMFM"
    bytes  4-7   version, u32, currently 1
    bytes  8-19  h, w, c as u32
    bytes 20-    h*w*c IEEE-754 float32 values, row-major with the
                 channel innermost: value index ((i*w)+j)*c + k

Similarity arithmetic runs on float32 values with float64 accumulation
for means and dot products.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    DimMismatch,
    EmptyMask,
    InvalidHeader,
    NonFiniteValue,
    TrailingData,
    TruncatedPayload,
    UnsupportedVersion,
)
from .mask import BinaryMask

MAGIC = b"PMFM"
VERSION = 1
_HEADER = struct.Struct("<4sIIII")
HEADER_SIZE = _HEADER.size  # 20 bytes

# An embedding is a 1-D float32 array of length c.
Embedding = np.ndarray


class FeatureMap:
    """An h x w grid of c-dimensional float32 patch embeddings."""

    __slots__ = ("values",)

    def __init__(self, values: np.ndarray) -> None:
        values = np.ascontiguousarray(values, dtype=np.float32)
        if values.ndim != 3:
            raise ValueError(f"feature map must be 3-D (h, w, c), got shape {values.shape}")
        if min(values.shape) < 1:
            raise ValueError(f"feature map dims must all be >= 1, got {values.shape}")
        self.values = values

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape

    def flat(self) -> np.ndarray:
        """(h*w, c) view of the values, row-major."""
        return self.values.reshape(-1, self.values.shape[2])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeatureMap):
            return NotImplemented
        return self.shape == other.shape and bool(
            np.array_equal(self.values, other.values)
        )

    def __repr__(self) -> str:
        return f"FeatureMap({self.height}x{self.width}x{self.channels})"


def load_feature_map(path: str | Path) -> FeatureMap:
    """Read a PMFM file, validating the header and that every value is finite."""
    raw = Path(path).read_bytes()
    if len(raw) < HEADER_SIZE:
        if raw[:4] != MAGIC:
            raise BadMagic(f"{path}: not a PMFM file")
        raise TruncatedPayload(f"{path}: {len(raw)} bytes is shorter than the header")
    magic, version, h, w, c = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise BadMagic(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersion(f"{path}: version {version} not supported")
    if min(h, w, c) < 1:
        raise InvalidHeader(f"{path}: dims must all be >= 1, got h={h} w={w} c={c}")
    expected = HEADER_SIZE + 4 * h * w * c
    if len(raw) < expected:
        raise TruncatedPayload(f"{path}: expected {expected} bytes, got {len(raw)}")
    if len(raw) > expected:
        raise TrailingData(f"{path}: {len(raw) - expected} unexpected trailing bytes")
    values = np.frombuffer(raw, dtype="<f4", offset=HEADER_SIZE).reshape(h, w, c)
    if not np.isfinite(values).all():
        raise NonFiniteValue(f"{path}: payload contains NaN or Inf")
    return FeatureMap(values.astype(np.float32, copy=True))


def save_feature_map(fm: FeatureMap, path: str | Path) -> None:
    """Write `fm` in the PMFM layout; load_feature_map inverts this bit-exactly."""
    header = _HEADER.pack(MAGIC, VERSION, fm.height, fm.width, fm.channels)
    payload = np.ascontiguousarray(fm.values, dtype="<f4").tobytes()
    Path(path).write_bytes(header + payload)


def l2_normalize(fm: FeatureMap) -> FeatureMap:
    """Scale each patch vector to unit L2 norm; all-zero vectors stay zero."""
    flat = fm.flat()
    # accumulate squared norms in float64 without materializing a f64 copy
    norms = np.sqrt(np.einsum("ij,ij->i", flat, flat, dtype=np.float64))
    norms[norms == 0.0] = 1.0
    scale = (1.0 / norms).astype(np.float32)
    out = flat * scale[:, None]
    return FeatureMap(out.reshape(fm.shape))


def mean_embedding(fm: FeatureMap, mask: BinaryMask) -> Embedding:
    """Arithmetic mean of the patch vectors under `mask` (float64 accumulation)."""
    if mask.shape != (fm.height, fm.width):
        raise DimMismatch(
            f"mask shape {mask.shape} does not match feature map {fm.height}x{fm.width}"
        )
    if mask.area == 0:
        raise EmptyMask("mean embedding of an empty mask is undefined")
    rows = fm.flat()[mask.bits.reshape(-1)]
    return (rows.sum(axis=0, dtype=np.float64) / mask.area).astype(np.float32)


def cosine_similarity(a: Embedding, b: Embedding) -> float:
    """a.b / (|a||b|), clamped to [-1, 1]; zero-norm inputs give 0.0."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimMismatch(f"embedding dims differ: {a.shape} vs {b.shape}")
    a64 = a.astype(np.float64)
    b64 = b.astype(np.float64)
    denom = np.sqrt(a64 @ a64) * np.sqrt(b64 @ b64)
    if denom == 0.0:
        return 0.0
    return float(np.clip((a64 @ b64) / denom, -1.0, 1.0))
