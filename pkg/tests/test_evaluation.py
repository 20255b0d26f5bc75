import json

import numpy as np
import pytest

from promptseg.errors import BadCounts, DimMismatch, EmptyMask
from promptseg.evaluation import (
    Detection,
    GroundTruth,
    RleMask,
    box_from_mask,
    box_iou,
    evaluate,
    load_ground_truth,
    load_predictions,
    mask_iou,
    match_detections,
    rle_decode,
    rle_encode,
)
from promptseg.mask import BinaryMask
from promptseg.pruning import ioa

from ._cocoref import evaluate_reference
from ._oracles import box_loop, greedy_match_replay, rle_encode_loop
from ._util import rand_blob_mask, rand_mask


def _mask(rows) -> BinaryMask:
    return BinaryMask(np.array(rows, dtype=bool))


def _det(mask: BinaryMask, score: float, image_id="img") -> Detection:
    return Detection(rle_encode(mask), score, image_id)


def _gt(mask: BinaryMask, image_id="img") -> GroundTruth:
    return GroundTruth(rle_encode(mask), image_id)


class TestRle:
    def test_all_zero_single_run(self, backend):
        assert rle_encode(BinaryMask.zeros(3, 3)).counts == [9]

    def test_single_row_example(self, backend):
        assert rle_encode(_mask([[0, 1, 1]])).counts == [1, 2]

    def test_leading_ones(self, backend):
        assert rle_encode(_mask([[1, 1], [1, 1]])).counts == [0, 4]

    def test_column_major_order(self, backend):
        # [[1,0],[0,1]] flattens column-major to 1,0,0,1
        assert rle_encode(_mask([[1, 0], [0, 1]])).counts == [0, 1, 2, 1]

    def test_matches_running_length_loop(self, backend, rng):
        for _ in range(200):
            m = rand_mask(rng, int(rng.integers(1, 9)), int(rng.integers(1, 9)), p=0.5)
            want = rle_encode_loop(m.bits.ravel(order="F"))
            assert rle_encode(m).counts == want

    def test_roundtrip_1000_random_masks(self, backend, rng):
        for _ in range(1000):
            h = int(rng.integers(1, 65))
            w = int(rng.integers(1, 65))
            m = rand_mask(rng, h, w, p=float(rng.uniform(0.05, 0.95)))
            assert rle_decode(rle_encode(m)) == m

    def test_bad_counts_sum(self, backend):
        with pytest.raises(BadCounts):
            rle_decode(RleMask((2, 2), [1, 2]))

    def test_negative_count(self, backend):
        with pytest.raises(BadCounts):
            rle_decode(RleMask((2, 2), [-1, 5]))

    def test_area_from_counts(self, backend, rng):
        m = rand_mask(rng, 7, 5)
        assert rle_encode(m).area == m.area


class TestMaskIoU:
    def test_identical(self, rng):
        m = rand_blob_mask(rng, 6, 6)
        assert mask_iou(m, m) == 1.0

    def test_disjoint(self):
        assert mask_iou(_mask([[1, 0]]), _mask([[0, 1]])) == 0.0

    def test_one_third(self):
        a = _mask([[1, 1, 0]])
        b = _mask([[0, 1, 1]])
        assert mask_iou(a, b) == 1 / 3

    def test_both_empty_is_zero(self):
        assert mask_iou(BinaryMask.zeros(2, 2), BinaryMask.zeros(2, 2)) == 0.0

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatch):
            mask_iou(BinaryMask.zeros(2, 2), BinaryMask.zeros(2, 3))

    def test_symmetric_and_bounded_by_ioa(self, rng):
        for _ in range(200):
            a = rand_blob_mask(rng, 8, 8)
            b = rand_blob_mask(rng, 8, 8)
            v = mask_iou(a, b)
            assert v == mask_iou(b, a)
            assert v <= min(ioa(a, b), ioa(b, a)) + 1e-12


class TestBoxFromMask:
    def test_single_pixel(self):
        bits = np.zeros((4, 5), dtype=bool)
        bits[2, 3] = True
        assert box_from_mask(BinaryMask(bits)) == (3, 2, 1, 1)

    def test_full_mask(self):
        assert box_from_mask(BinaryMask(np.ones((4, 7), dtype=bool))) == (0, 0, 7, 4)

    def test_empty_raises(self):
        with pytest.raises(EmptyMask):
            box_from_mask(BinaryMask.zeros(2, 2))

    def test_matches_loop_oracle(self, rng):
        for _ in range(300):
            m = rand_blob_mask(rng, 9, 7)
            assert box_from_mask(m) == box_loop(m.bits)

    def test_box_iou_basic(self):
        assert box_iou((0, 0, 2, 2), (0, 0, 2, 2)) == 1.0
        assert box_iou((0, 0, 2, 2), (2, 2, 2, 2)) == 0.0
        assert box_iou((0, 0, 2, 2), (1, 0, 2, 2)) == pytest.approx(1 / 3)


class TestMatchDetections:
    def test_identical_matches(self, backend, rng):
        m = rand_blob_mask(rng, 6, 6)
        out = match_detections([_det(m, 1.0)], [rle_encode(m)], 0.5)
        assert out == [(0, 0)]

    def test_no_gt_is_false_positive(self, backend, rng):
        out = match_detections([_det(rand_blob_mask(rng, 6, 6), 1.0)], [], 0.5)
        assert out == [(0, None)]

    def test_higher_score_wins_contested_gt(self, backend, rng):
        gt = rand_blob_mask(rng, 6, 6)
        out = match_detections([_det(gt, 0.3), _det(gt, 0.9)], [rle_encode(gt)], 0.5)
        assert out == [(1, 0), (0, None)]  # det 1 processed first, takes the gt

    def test_score_tie_prefers_larger_area(self, backend):
        big = _mask([[1, 1, 1, 1]])
        small = _mask([[1, 1, 0, 0]])
        out = match_detections([_det(small, 0.5), _det(big, 0.5)], [rle_encode(big)], 0.5)
        assert out[0][0] == 1

    def test_matches_greedy_replay_on_small_instances(self, backend, rng):
        for _ in range(300):
            n_det = int(rng.integers(0, 5))
            n_gt = int(rng.integers(0, 5))
            dets = [
                _det(rand_mask(rng, 4, 4, p=0.5), float(rng.random())) for _ in range(n_det)
            ]
            gts = [rle_encode(rand_mask(rng, 4, 4, p=0.5)) for _ in range(n_gt)]
            thresh = float(rng.choice([0.3, 0.5, 0.75]))
            got = match_detections(dets, gts, thresh)
            det_order = [d for d, _ in got]
            ious = np.zeros((n_det, n_gt))
            for d in range(n_det):
                for g in range(n_gt):
                    ious[d, g] = mask_iou(rle_decode(dets[d].mask), rle_decode(gts[g]))
            want = greedy_match_replay(ious, det_order, thresh)
            assert [g for _, g in got] == want


def _random_eval_instance(rng, n_images=3, hw=12):
    dets, gts = [], []
    dets_by_img, gts_by_img = {}, {}
    for i in range(int(rng.integers(1, n_images + 1))):
        img = f"im{i}"
        dets_by_img[img] = []
        gts_by_img[img] = []
        for _ in range(int(rng.integers(1, 5))):
            g = rand_blob_mask(rng, hw, hw)
            gts.append(_gt(g, img))
            gts_by_img[img].append(g.bits)
            if rng.random() < 0.7:  # a near-duplicate detection
                noisy = g.bits.copy()
                flip = rng.random(noisy.shape) < 0.08
                noisy = noisy ^ flip
                if noisy.any():
                    d = BinaryMask(noisy)
                    s = float(rng.random())
                    dets.append(_det(d, s, img))
                    dets_by_img[img].append((d.bits, s))
        for _ in range(int(rng.integers(0, 3))):  # spurious detections
            d = rand_blob_mask(rng, hw, hw)
            s = float(rng.random())
            dets.append(_det(d, s, img))
            dets_by_img[img].append((d.bits, s))
    return dets, gts, dets_by_img, gts_by_img


class TestEvaluate:
    def test_perfect_predictions_score_one(self, backend, rng):
        dets, gts = [], []
        for i in range(3):
            for _ in range(3):
                m = rand_blob_mask(rng, 10, 10)
                dets.append(_det(m, 1.0, f"im{i}"))
                gts.append(_gt(m, f"im{i}"))
        report = evaluate(dets, gts)
        assert report.ap == 1.0
        assert report.ap50 == 1.0
        assert report.ar100 == 1.0

    def test_no_predictions_is_zero(self, backend, rng):
        gts = [_gt(rand_blob_mask(rng, 8, 8), "im0")]
        report = evaluate([], gts)
        assert report.ap == 0.0 and report.ar100 == 0.0
        assert report.num_gt == 1 and report.num_dets == 0

    def test_empty_everything(self, backend):
        report = evaluate([], [])
        assert report.ap == 0.0 and report.num_gt == 0 and report.num_images == 0

    def test_ap_is_mean_of_thresholds(self, backend, rng):
        dets, gts, _, _ = _random_eval_instance(rng)
        report = evaluate(dets, gts)
        assert abs(report.ap - np.mean(report.per_threshold_ap)) < 1e-9

    @pytest.mark.parametrize("iou_type", ["mask", "box"])
    def test_matches_reference_implementation(self, backend, rng, iou_type):
        for _ in range(60):
            dets, gts, dets_by_img, gts_by_img = _random_eval_instance(rng)
            report = evaluate(dets, gts, iou_type=iou_type)
            want = evaluate_reference(dets_by_img, gts_by_img, iou_type=iou_type)
            assert abs(report.ap - want["ap"]) < 1e-6
            assert abs(report.ap50 - want["ap50"]) < 1e-6
            assert abs(report.ar100 - want["ar100"]) < 1e-6

    def test_score_rescaling_invariance(self, backend, rng):
        dets, gts, _, _ = _random_eval_instance(rng)
        base = evaluate(dets, gts)
        squashed = [
            Detection(d.mask, float(1 / (1 + np.exp(-6 * d.score))), d.image_id) for d in dets
        ]
        again = evaluate(squashed, gts)
        assert base.per_threshold_ap == again.per_threshold_ap
        assert base.ar100 == again.ar100

    def test_lower_score_duplicate_never_raises_ap(self, backend, rng):
        for _ in range(20):
            dets, gts, _, _ = _random_eval_instance(rng)
            scores = [d.score for d in dets]
            if not dets:
                continue
            base = evaluate(dets, gts)
            perfect_gt = gts[0]
            dup = Detection(perfect_gt.mask, min(scores) / 2, perfect_gt.image_id)
            dets_plus = dets + [
                Detection(perfect_gt.mask, max(scores) + 1.0, perfect_gt.image_id),
                dup,
            ]
            with_perfect = evaluate(dets_plus, gts)
            dets_plus_dup = dets_plus + [
                Detection(perfect_gt.mask, dup.score / 2, perfect_gt.image_id)
            ]
            with_dup = evaluate(dets_plus_dup, gts)
            for a, b in zip(with_dup.per_threshold_ap, with_perfect.per_threshold_ap):
                assert a <= b + 1e-12

    def test_max_dets_cap(self, backend, rng):
        gt = rand_blob_mask(rng, 8, 8)
        junk = BinaryMask(~gt.bits)
        dets = [_det(junk, 1.0 - 0.001 * k) for k in range(100)]
        dets.append(_det(gt, 0.0001))  # the only true positive, ranked 101st
        report = evaluate(dets, [_gt(gt)])
        assert report.ar100 == 0.0  # capped out before the true positive


class TestJsonInterchange:
    def test_roundtrip(self, backend, rng, tmp_path):
        m = rand_blob_mask(rng, 6, 6)
        payload = {
            "postprocess": "nearest",
            "images": [
                {
                    "image_id": "a",
                    "height": 6,
                    "width": 6,
                    "masks": [{"counts": rle_encode(m).counts, "score": 0.5}],
                }
            ],
        }
        p = tmp_path / "pred.json"
        p.write_text(json.dumps(payload))
        dets = load_predictions(p)
        assert len(dets) == 1
        assert rle_decode(dets[0].mask) == m
        gt_payload = {
            "images": [
                {
                    "image_id": "a",
                    "height": 6,
                    "width": 6,
                    "masks": [{"counts": rle_encode(m).counts}],
                }
            ]
        }
        g = tmp_path / "gt.json"
        g.write_text(json.dumps(gt_payload))
        gts = load_ground_truth(g)
        assert len(gts) == 1 and rle_decode(gts[0].mask) == m

    def test_bad_counts_rejected_on_load(self, backend, tmp_path):
        p = tmp_path / "pred.json"
        p.write_text(
            json.dumps(
                {
                    "images": [
                        {
                            "image_id": "a",
                            "height": 2,
                            "width": 2,
                            "masks": [{"counts": [1, 1], "score": 0.5}],
                        }
                    ]
                }
            )
        )
        with pytest.raises(BadCounts):
            load_predictions(p)
