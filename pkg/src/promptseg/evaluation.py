"""Self-contained class-agnostic COCO-protocol evaluator.

Masks travel as column-major run-length encodings (leading zero-run
first). AP uses the 0.50:0.05:0.95 IoU threshold grid with 101-point
interpolation; AR is recall averaged over the same grid. At most 100
top-scoring detections per image enter the matching, following the
standard convention.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import BadCounts, EmptyMask
from .mask import BinaryMask

IOU_THRESHOLDS = np.round(np.arange(0.50, 0.96, 0.05), 2)
RECALL_THRESHOLDS = np.linspace(0.0, 1.0, 101)
MAX_DETECTIONS = 100


@dataclass
class RleMask:
    """Column-major RLE: counts alternate 0-runs and 1-runs, zeros first."""

    size: tuple[int, int]  # (height, width)
    counts: list[int]

    @property
    def area(self) -> int:
        return int(sum(self.counts[1::2]))

    def validate(self) -> "RleMask":
        if any(c < 0 for c in self.counts):
            raise BadCounts(f"negative run length in {self.counts[:8]}...")
        total = self.size[0] * self.size[1]
        if sum(self.counts) != total:
            raise BadCounts(
                f"counts sum {sum(self.counts)} != {self.size[0]}x{self.size[1]} = {total}"
            )
        return self


@dataclass
class Detection:
    mask: RleMask
    score: float
    image_id: str


@dataclass
class GroundTruth:
    mask: RleMask
    image_id: str


@dataclass
class ImageMatchRecord:
    image_id: str
    num_dets: int
    num_gt: int
    matched_per_threshold: list[int]


@dataclass
class EvalReport:
    ap: float
    ap50: float
    ar100: float
    per_threshold_ap: list[float]
    num_images: int
    num_gt: int
    num_dets: int
    iou_type: str = "mask"
    per_image: list[ImageMatchRecord] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "ap": self.ap,
            "ap50": self.ap50,
            "ar100": self.ar100,
            "per_threshold_ap": self.per_threshold_ap,
            "iou_thresholds": [float(t) for t in IOU_THRESHOLDS],
            "num_images": self.num_images,
            "num_gt": self.num_gt,
            "num_dets": self.num_dets,
            "iou_type": self.iou_type,
            "per_image": [
                {
                    "image_id": r.image_id,
                    "num_dets": r.num_dets,
                    "num_gt": r.num_gt,
                    "matched_per_threshold": r.matched_per_threshold,
                }
                for r in self.per_image
            ],
        }


def rle_encode(mask: BinaryMask) -> RleMask:
    flat = mask.bits.ravel(order="F")
    counts = _kernels.active().rle_encode(flat)
    return RleMask(size=mask.shape, counts=[int(c) for c in counts])


def rle_decode(rle: RleMask) -> BinaryMask:
    rle.validate()
    h, w = rle.size
    flat = _kernels.active().rle_decode(np.asarray(rle.counts, dtype=np.int64), h * w)
    return BinaryMask(flat.reshape((h, w), order="F"))


def mask_iou(a: BinaryMask, b: BinaryMask) -> float:
    """|a & b| / |a | b|; defined as 0 when both masks are empty."""
    a.check_same_shape(b)
    inter = a.intersection_area(b)
    union = a.area + b.area - inter
    if union == 0:
        return 0.0
    return inter / union


def box_from_mask(mask: BinaryMask) -> tuple[int, int, int, int]:
    """Tight (x, y, w, h) box around the positive pixels."""
    if mask.area == 0:
        raise EmptyMask("cannot box an empty mask")
    rows = np.flatnonzero(mask.bits.any(axis=1))
    cols = np.flatnonzero(mask.bits.any(axis=0))
    y0, y1 = int(rows[0]), int(rows[-1])
    x0, x1 = int(cols[0]), int(cols[-1])
    return (x0, y0, x1 - x0 + 1, y1 - y0 + 1)


def box_iou(a: tuple[float, float, float, float], b: tuple[float, float, float, float]) -> float:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    ix = min(ax + aw, bx + bw) - max(ax, bx)
    iy = min(ay + ah, by + bh) - max(ay, by)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = aw * ah + bw * bh - inter
    return inter / union


def _iou_matrix(det_masks, gt_masks, iou_type: str) -> np.ndarray:
    """IoU of every detection against every ground truth (decoded masks)."""
    out = np.zeros((len(det_masks), len(gt_masks)))
    if iou_type == "box":
        det_boxes = [box_from_mask(m) for m in det_masks]
        gt_boxes = [box_from_mask(m) for m in gt_masks]
        for d, db in enumerate(det_boxes):
            for g, gb in enumerate(gt_boxes):
                out[d, g] = box_iou(db, gb)
    else:
        for d, dm in enumerate(det_masks):
            for g, gm in enumerate(gt_masks):
                out[d, g] = mask_iou(dm, gm)
    return out


def _greedy_match(ious: np.ndarray, order: np.ndarray, thresh: float) -> np.ndarray:
    """One-to-one greedy matching over detections in `order`.

    Each detection takes the still-unmatched ground truth with the
    highest IoU >= thresh; equal IoUs resolve to the later ground-truth
    index (canonical COCO behavior). Returns gt index per detection
    (aligned with `order`), -1 when unmatched.
    """
    n_gt = ious.shape[1]
    gt_taken = np.zeros(n_gt, dtype=bool)
    out = np.full(order.size, -1, dtype=np.int64)
    for pos, d in enumerate(order):
        best = thresh
        m = -1
        for g in range(n_gt):
            if gt_taken[g]:
                continue
            if ious[d, g] < best:
                continue
            best = ious[d, g]
            m = g
        if m >= 0:
            gt_taken[m] = True
            out[pos] = m
    return out


def match_detections(
    dets: list[Detection],
    gts: list[RleMask],
    iou_thresh: float,
    iou_type: str = "mask",
) -> list[tuple[int, int | None]]:
    """Match one image's detections against its ground truths.

    Detections process in descending score order (ties: larger mask
    area first, then input index). Returns (det_index, gt_index or
    None) pairs in processing order.
    """
    order = _detection_order(dets)
    det_masks = [rle_decode(d.mask) for d in dets]
    gt_masks = [rle_decode(g) for g in gts]
    ious = _iou_matrix(det_masks, gt_masks, iou_type)
    matched = _greedy_match(ious, order, iou_thresh)
    return [
        (int(d), int(g) if g >= 0 else None) for d, g in zip(order, matched)
    ]


def _detection_order(dets: list[Detection]) -> np.ndarray:
    keys = sorted(
        range(len(dets)),
        key=lambda ix: (-dets[ix].score, -dets[ix].mask.area, ix),
    )
    return np.asarray(keys, dtype=np.int64)


def evaluate(
    detections: list[Detection],
    ground_truths: list[GroundTruth],
    iou_type: str = "mask",
    max_dets: int = MAX_DETECTIONS,
) -> EvalReport:
    """Class-agnostic AP (IoU 0.50:0.95), AP50, and AR@`max_dets`.

    Precision/recall curves are built globally over score-sorted
    detections; AP interpolates precision at 101 recall points. With no
    ground truths at all the metrics are reported as 0 with num_gt=0.
    """
    image_ids = sorted(
        {d.image_id for d in detections} | {g.image_id for g in ground_truths}
    )
    dets_by_img = {img: [] for img in image_ids}
    gts_by_img = {img: [] for img in image_ids}
    for d in detections:
        dets_by_img[d.image_id].append(d)
    for g in ground_truths:
        gts_by_img[g.image_id].append(g)

    n_thr = IOU_THRESHOLDS.size
    all_scores: list[np.ndarray] = []
    all_matched: list[np.ndarray] = []  # (n_thr, n_dets) blocks per image
    records: list[ImageMatchRecord] = []
    num_gt = 0
    num_dets_total = 0

    for img in image_ids:
        dets = dets_by_img[img]
        gts = gts_by_img[img]
        num_dets_total += len(dets)
        num_gt += len(gts)
        order = _detection_order(dets)[:max_dets]
        det_masks = [rle_decode(dets[ix].mask) for ix in order]
        gt_masks = [rle_decode(g.mask) for g in gts]
        ious = (
            _iou_matrix(det_masks, gt_masks, iou_type)
            if det_masks and gt_masks
            else np.zeros((len(det_masks), len(gt_masks)))
        )
        local_order = np.arange(len(det_masks), dtype=np.int64)
        matched = np.zeros((n_thr, len(det_masks)), dtype=bool)
        matched_counts = []
        for t, thresh in enumerate(IOU_THRESHOLDS):
            m = _greedy_match(ious, local_order, float(thresh))
            matched[t] = m >= 0
            matched_counts.append(int((m >= 0).sum()))
        all_scores.append(np.array([dets[ix].score for ix in order], dtype=np.float64))
        all_matched.append(matched)
        records.append(
            ImageMatchRecord(img, len(dets), len(gts), matched_counts)
        )

    scores = np.concatenate(all_scores) if all_scores else np.zeros(0)
    matched_all = (
        np.concatenate(all_matched, axis=1) if all_matched else np.zeros((n_thr, 0), dtype=bool)
    )

    per_threshold_ap = []
    recalls = []
    if num_gt == 0:
        per_threshold_ap = [0.0] * n_thr
        recalls = [0.0] * n_thr
    else:
        sort_idx = np.argsort(-scores, kind="mergesort")
        for t in range(n_thr):
            tp = matched_all[t][sort_idx]
            tp_cum = np.cumsum(tp)
            fp_cum = np.cumsum(~tp)
            if tp.size == 0:
                per_threshold_ap.append(0.0)
                recalls.append(0.0)
                continue
            recall = tp_cum / num_gt
            precision = tp_cum / (tp_cum + fp_cum)
            recalls.append(float(recall[-1]))
            per_threshold_ap.append(_interpolated_ap(recall, precision))

    ap = float(np.mean(per_threshold_ap))
    ar = float(np.mean(recalls))
    return EvalReport(
        ap=ap,
        ap50=per_threshold_ap[0],
        ar100=ar,
        per_threshold_ap=[float(x) for x in per_threshold_ap],
        num_images=len(image_ids),
        num_gt=num_gt,
        num_dets=num_dets_total,
        iou_type=iou_type,
        per_image=records,
    )


def _interpolated_ap(recall: np.ndarray, precision: np.ndarray) -> float:
    """101-point interpolation with a monotone precision envelope."""
    pr = precision.copy()
    for i in range(pr.size - 1, 0, -1):
        if pr[i] > pr[i - 1]:
            pr[i - 1] = pr[i]
    inds = np.searchsorted(recall, RECALL_THRESHOLDS, side="left")
    q = np.zeros(RECALL_THRESHOLDS.size)
    valid = inds < pr.size
    q[valid] = pr[inds[valid]]
    return float(q.mean())


# ---------------------------------------------------------------------------
# JSON interchange
# ---------------------------------------------------------------------------


def _parse_images(payload: dict, path, with_scores: bool):
    if not isinstance(payload, dict) or "images" not in payload:
        raise BadCounts(f"{path}: missing top-level 'images' list")
    dets: list[Detection] = []
    gts: list[GroundTruth] = []
    for entry in payload["images"]:
        image_id = str(entry["image_id"])
        size = (int(entry["height"]), int(entry["width"]))
        for m in entry.get("masks", []):
            rle = RleMask(size=size, counts=[int(c) for c in m["counts"]]).validate()
            if with_scores:
                dets.append(Detection(rle, float(m["score"]), image_id))
            else:
                gts.append(GroundTruth(rle, image_id))
    return dets, gts


def load_predictions(path: str | Path) -> list[Detection]:
    payload = json.loads(Path(path).read_text())
    return _parse_images(payload, path, with_scores=True)[0]


def load_ground_truth(path: str | Path) -> list[GroundTruth]:
    payload = json.loads(Path(path).read_text())
    return _parse_images(payload, path, with_scores=False)[1]
