"""COCO-style annotation conversion to the core evaluator's GT schema.

Polygon segmentations are rasterized with PIL and re-encoded as
column-major RLE; uncompressed RLE counts pass through (validated);
compressed count strings are decoded first. Crowd annotations are
dropped and tallied in the conversion report.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .rle import counts_from_string, decode_counts, encode_counts


@dataclass
class ConversionReport:
    images: int = 0
    converted: int = 0
    crowd_dropped: int = 0
    polygons: int = 0
    rle_uncompressed: int = 0
    rle_compressed: int = 0
    empty_dropped: int = 0

    def to_dict(self) -> dict:
        return self.__dict__.copy()


def rasterize_polygons(polygons: list[list[float]], height: int, width: int) -> np.ndarray:
    """Union of filled polygons ([x0, y0, x1, y1, ...] rings) as a bitmap."""
    canvas = Image.new("1", (width, height), 0)
    draw = ImageDraw.Draw(canvas)
    for ring in polygons:
        if len(ring) < 6:
            continue
        xy = list(zip(ring[0::2], ring[1::2]))
        draw.polygon(xy, fill=1, outline=1)
    return np.asarray(canvas, dtype=bool)


def _segmentation_to_counts(segmentation, height: int, width: int, report: ConversionReport):
    if isinstance(segmentation, dict):
        counts = segmentation["counts"]
        if isinstance(counts, str):
            report.rle_compressed += 1
            counts = counts_from_string(counts)
        else:
            report.rle_uncompressed += 1
            counts = [int(c) for c in counts]
        decode_counts(counts, height, width)  # validates the sum
        return counts
    report.polygons += 1
    bits = rasterize_polygons(segmentation, height, width)
    if not bits.any():
        return None
    return encode_counts(bits)


def convert_gt(coco: dict, image_subset: set | None = None) -> tuple[dict, ConversionReport]:
    """COCO annotation payload -> (evaluator GT payload, report)."""
    report = ConversionReport()
    images = {}
    for entry in coco.get("images", []):
        img_id = entry["id"]
        if image_subset is not None and img_id not in image_subset and str(img_id) not in {
            str(s) for s in image_subset
        }:
            continue
        images[img_id] = {
            "image_id": str(img_id),
            "height": int(entry["height"]),
            "width": int(entry["width"]),
            "masks": [],
        }
    report.images = len(images)
    for ann in coco.get("annotations", []):
        img_id = ann["image_id"]
        if img_id not in images:
            continue
        if ann.get("iscrowd", 0):
            report.crowd_dropped += 1
            continue
        entry = images[img_id]
        counts = _segmentation_to_counts(
            ann["segmentation"], entry["height"], entry["width"], report
        )
        if counts is None:
            report.empty_dropped += 1
            continue
        entry["masks"].append({"counts": counts})
        report.converted += 1
    return {"images": [images[k] for k in sorted(images, key=str)]}, report


def convert_gt_file(
    coco_path: str | Path,
    out_path: str | Path,
    image_subset: set | None = None,
) -> ConversionReport:
    coco = json.loads(Path(coco_path).read_text())
    payload, report = convert_gt(coco, image_subset)
    out_path = Path(out_path)
    out_path.write_text(json.dumps(payload, indent=2) + "\n")
    Path(str(out_path) + ".report.json").write_text(
        json.dumps(report.to_dict(), indent=2) + "\n"
    )
    return report
