"""Mask overlays on source images for visual inspection."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .rle import decode_counts

_PALETTE = [
    (230, 60, 60),
    (60, 160, 230),
    (70, 200, 110),
    (240, 180, 40),
    (170, 90, 220),
    (250, 120, 190),
    (100, 220, 220),
    (240, 130, 50),
]


def overlay_image(image: Image.Image, masks: list[np.ndarray], alpha: float = 0.45) -> Image.Image:
    """Blend each mask over the image in a rotating palette color."""
    base = np.asarray(image.convert("RGB"), dtype=np.float32)
    h, w = base.shape[:2]
    out = base.copy()
    for idx, bits in enumerate(masks):
        if bits.shape != (h, w):
            mask_img = Image.fromarray(bits.astype(np.uint8) * 255).resize((w, h), Image.NEAREST)
            bits = np.asarray(mask_img, dtype=bool)
        color = np.array(_PALETTE[idx % len(_PALETTE)], dtype=np.float32)
        out[bits] = (1 - alpha) * out[bits] + alpha * color
    return Image.fromarray(out.astype(np.uint8))


def overlay_from_predictions(
    image_path: str | Path,
    predictions_path: str | Path,
    image_id: str | None = None,
) -> Image.Image:
    payload = json.loads(Path(predictions_path).read_text())
    image_path = Path(image_path)
    wanted = image_id if image_id is not None else image_path.stem
    entry = next((e for e in payload["images"] if e["image_id"] == wanted), None)
    if entry is None:
        raise KeyError(f"image_id {wanted!r} not present in {predictions_path}")
    masks = [
        decode_counts(m["counts"], entry["height"], entry["width"]) for m in entry["masks"]
    ]
    with Image.open(image_path) as img:
        return overlay_image(img, masks)
