"""PMFM writer (the core's published feature-map format).

Layout, little-endian: magic "PMFM" | version u32 = 1 | h, w, c u32 |
h*w*c float32, row-major with channel innermost. Files are written
atomically (temp file + rename) and each gets a JSON sidecar recording
how the features were produced.
"""
from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"PMFM"
VERSION = 1
_HEADER = struct.Struct("<4sIIII")


def write_pmfm(values: np.ndarray, path: str | Path) -> None:
    """values: (h, w, c) float32, all finite."""
    values = np.ascontiguousarray(values, dtype=np.float32)
    if values.ndim != 3 or min(values.shape) < 1:
        raise ValueError(f"expected (h, w, c) with positive dims, got {values.shape}")
    if not np.isfinite(values).all():
        raise ValueError("feature values must be finite")
    h, w, c = values.shape
    payload = _HEADER.pack(MAGIC, VERSION, h, w, c) + values.astype("<f4").tobytes()
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_sidecar(path: str | Path, metadata: dict) -> Path:
    sidecar = Path(str(path) + ".json")
    sidecar.write_text(json.dumps(metadata, indent=2) + "\n")
    return sidecar
