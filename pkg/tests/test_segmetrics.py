"""Masked loss, drawing-mask filtering, instance combination, mask AP."""

import numpy as np
import pytest
import torch

from sketchtint.core import BACKGROUND_ID, InstanceRecord
from sketchtint.segmetrics import (
    EmptyForeground,
    combine_semantic_instance,
    filter_by_drawing_mask,
    mask_ap,
    mask_iou,
    masked_cross_entropy,
)

import oracles


# ---------------------------------------------------------------------------
# masked cross-entropy

def _random_case(rng, h=6, w=7, k=5):
    logits = rng.normal(size=(h, w, k))
    target = rng.integers(0, k, size=(h, w))
    mask = (rng.random((h, w)) < 0.5).astype(np.uint8)
    if not mask.any():
        mask[h // 2, w // 2] = 1
    return logits, target, mask


def test_masked_ce_matches_pixel_list(rng):
    for _ in range(100):
        logits, target, mask = _random_case(rng)
        got = float(masked_cross_entropy(
            torch.from_numpy(logits), torch.from_numpy(target),
            torch.from_numpy(mask)))
        want = oracles.pixel_list_cross_entropy(logits, target, mask)
        assert abs(got - want) <= 1e-9, f"|{got} - {want}| too large"


def test_masked_ce_bit_invariant_to_background(rng):
    for _ in range(30):
        logits, target, mask = _random_case(rng)
        base = float(masked_cross_entropy(
            torch.from_numpy(logits.copy()), torch.from_numpy(target.copy()),
            torch.from_numpy(mask)))
        junk_logits = logits.copy()
        junk_logits[mask == 0] = np.nan
        junk_target = target.copy()
        junk_target[mask == 0] = 0
        again = float(masked_cross_entropy(
            torch.from_numpy(junk_logits), torch.from_numpy(junk_target),
            torch.from_numpy(mask)))
        assert again == base, "background values leaked into the loss"


def test_masked_ce_rejects_empty_and_mismatched():
    logits = torch.zeros(3, 3, 4)
    target = torch.zeros(3, 3, dtype=torch.long)
    with pytest.raises(EmptyForeground):
        masked_cross_entropy(logits, target, torch.zeros(3, 3))
    with pytest.raises(ValueError, match="shapes disagree"):
        masked_cross_entropy(logits, target, torch.ones(2, 2))


# ---------------------------------------------------------------------------
# drawing-mask filter and semantic/instance combination

def test_filter_by_drawing_mask(rng):
    pred = rng.integers(1, 6, size=(5, 5))
    mask = (rng.random((5, 5)) < 0.5).astype(np.uint8)
    out = filter_by_drawing_mask(pred, mask)
    assert (out[mask == 0] == BACKGROUND_ID).all()
    assert (out[mask == 1] == pred[mask == 1]).all()
    with pytest.raises(ValueError):
        filter_by_drawing_mask(pred, np.ones((4, 4)))


def _inst(mask, label, score=1.0, rec_id=1):
    mask = np.asarray(mask, dtype=np.uint8)
    ys, xs = np.nonzero(mask)
    bbox = ((int(xs.min()), int(ys.min()),
             int(ys.max() - ys.min() + 1), int(xs.max() - xs.min() + 1))
            if ys.size else (0, 0, 1, 1))
    return InstanceRecord(id=rec_id, label=label, score=score,
                          bbox=bbox, mask=mask)


def test_combine_shrinks_and_drops():
    mask = np.zeros((6, 6), dtype=np.uint8)
    mask[1:5, 1:5] = 1
    semantic = np.zeros((6, 6), dtype=np.int64)
    semantic[1:3, 1:5] = 3  # only the top half agrees
    kept = combine_semantic_instance([_inst(mask, label=3)], semantic)
    assert len(kept) == 1
    assert kept[0].bbox == (1, 1, 2, 4), "bbox re-tightened to the agreement"
    assert int(kept[0].mask.sum()) == 8
    # a fully disagreeing instance disappears
    assert combine_semantic_instance([_inst(mask, label=9)], semantic) == []
    with pytest.raises(ValueError):
        combine_semantic_instance([_inst(mask, label=3)], np.zeros((4, 4)))


# ---------------------------------------------------------------------------
# mask AP

def test_mask_iou_values():
    a = np.array([[1, 1], [0, 0]])
    b = np.array([[1, 0], [1, 0]])
    assert mask_iou(a, b) == pytest.approx(1 / 3)
    assert mask_iou(np.zeros((2, 2)), np.zeros((2, 2))) == 0.0
    assert mask_iou(a, a) == 1.0


def test_mask_ap_identity_is_exactly_one(rng):
    gts = []
    for i in range(4):
        mask = np.zeros((8, 8), dtype=np.uint8)
        mask[2 * (i % 3): 2 * (i % 3) + 2, 2 * i % 8: 2 * i % 8 + 2] = 1
        gts.append(_inst(mask, label=1 + i % 2, rec_id=i + 1))
    preds = [_inst(g.mask, g.label, score=0.9 - 0.1 * i, rec_id=g.id)
             for i, g in enumerate(gts)]
    report = mask_ap(preds, gts)
    assert report.ap == 1.0 and report.ap50 == 1.0 and report.ap75 == 1.0


def test_mask_ap_frozen_half_recall():
    # two gts of one class, one perfect prediction -> precision 1 up to
    # recall .5, so the 101-point mean is 51/101 at every threshold
    m1 = np.zeros((6, 6), dtype=np.uint8)
    m1[0:2, 0:2] = 1
    m2 = np.zeros((6, 6), dtype=np.uint8)
    m2[4:6, 4:6] = 1
    gts = [_inst(m1, 2, rec_id=1), _inst(m2, 2, rec_id=2)]
    report = mask_ap([_inst(m1, 2, score=0.8, rec_id=1)], gts)
    assert report.ap == pytest.approx(51 / 101)
    assert report.ap50 == pytest.approx(51 / 101)


def test_mask_ap_requires_scores():
    m = np.ones((3, 3), dtype=np.uint8)
    with pytest.raises(ValueError, match="no usable score"):
        mask_ap([_inst(m, 1, score=None)], [_inst(m, 1)])
    with pytest.raises(ValueError, match="no usable score"):
        mask_ap([_inst(m, 1, score=float("nan"))], [_inst(m, 1)])


def test_mask_ap_empty_gt():
    report = mask_ap([], [])
    assert (report.ap, report.ap50, report.ap75) == (0.0, 0.0, 0.0)


def _random_instances(rng, n, labels, size=4, with_scores=True):
    out = []
    for i in range(n):
        mask = (rng.random((size, size)) < 0.45).astype(np.uint8)
        if not mask.any():
            mask[rng.integers(size), rng.integers(size)] = 1
        score = round(float(rng.random()), 3) if with_scores else 1.0
        out.append(_inst(mask, int(rng.choice(labels)), score=score,
                         rec_id=i + 1))
    return out


def test_mask_ap_matches_enumeration_oracle(rng):
    for _ in range(60):
        labels = [1, 2][: int(rng.integers(1, 3))]
        gts = _random_instances(rng, int(rng.integers(1, 4)), labels,
                                with_scores=False)
        preds = _random_instances(rng, int(rng.integers(0, 4)), labels)
        report = mask_ap(preds, gts)
        ap, ap50, ap75 = oracles.mask_ap_oracle(preds, gts)
        assert report.ap == pytest.approx(ap, abs=1e-12)
        assert report.ap50 == pytest.approx(ap50, abs=1e-12)
        assert report.ap75 == pytest.approx(ap75, abs=1e-12)
