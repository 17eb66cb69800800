"""Segmentation adaptations and evaluation.

Holds the background-masked training loss, drawing-mask filtering, the
semantic/instance combination rule, mask AP, and a small stand-in
segmenter used by the end-to-end plumbing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .core import BACKGROUND_ID, NUM_CLASSES, InstanceRecord

IOU_THRESHOLDS = np.arange(50, 100, 5) / 100.0
RECALL_POINTS = np.linspace(0.0, 1.0, 101)


class EmptyForeground(ValueError):
    """Raised when a masked reduction has no foreground pixels."""


@dataclass
class SegPrediction:
    """Per-pixel class logits, shape (H, W, K), plus a provenance tag."""

    logits: np.ndarray
    source: str = "toy segmenter"


@dataclass
class APReport:
    ap: float
    ap50: float
    ap75: float
    per_class: dict


def masked_cross_entropy(logits, target, mask):
    """Mean cross-entropy over mask=1 pixels only.

    The masked-out pixels are removed by boolean selection before any
    arithmetic, so the value is bit-invariant to whatever the logits or
    targets hold on the background.
    """
    if not torch.is_tensor(logits):
        logits = torch.as_tensor(np.asarray(logits))
    if not torch.is_tensor(target):
        target = torch.as_tensor(np.asarray(target))
    target = target.long()
    sel = torch.as_tensor(np.asarray(mask)) if not torch.is_tensor(mask) else mask
    sel = sel != 0
    if logits.shape[:2] != sel.shape or target.shape != sel.shape:
        raise ValueError(
            f"shapes disagree: logits {tuple(logits.shape)}, "
            f"target {tuple(target.shape)}, mask {tuple(sel.shape)}"
        )
    if not bool(sel.any()):
        raise EmptyForeground("mask selects no pixels")
    return F.cross_entropy(logits[sel], target[sel], reduction="mean")


def filter_by_drawing_mask(pred: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Background wherever the sketch has no stroke; pred label elsewhere."""
    pred = np.asarray(pred)
    mask = np.asarray(mask)
    if pred.shape != mask.shape:
        raise ValueError(f"shapes disagree: pred {pred.shape}, mask {mask.shape}")
    return np.where(mask != 0, pred, BACKGROUND_ID)


def combine_semantic_instance(instances, semantic: np.ndarray):
    """Keep only mask pixels whose semantic label equals the instance label.

    Instances whose mask empties out are dropped; surviving bboxes are
    recomputed to the tight fit of the reduced mask.
    """
    semantic = np.asarray(semantic)
    out = []
    for inst in instances:
        if inst.mask.shape != semantic.shape:
            raise ValueError("semantic map size does not match instance mask")
        new_mask = ((inst.mask > 0) & (semantic == inst.label)).astype(np.uint8)
        if not new_mask.any():
            continue
        rows, cols = np.nonzero(new_mask)
        y, x = int(rows.min()), int(cols.min())
        bh = int(rows.max()) - y + 1
        bw = int(cols.max()) - x + 1
        out.append(InstanceRecord(
            id=inst.id, label=inst.label, score=inst.score,
            bbox=(x, y, bh, bw), mask=new_mask,
        ))
    return out


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a) > 0
    b = np.asarray(b) > 0
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 0.0
    return float(np.logical_and(a, b).sum() / union)


def _class_ap(preds, gts, iou, thr):
    """TP/FP sweep for one class at one IoU threshold → 101-point AP.

    ``preds`` are already sorted by descending score (ties by id); for
    each one the best-IoU unmatched gt at or above the threshold is
    taken, smaller gt index on equal IoU.
    """
    n_gt = len(gts)
    matched = [False] * n_gt
    tp = np.zeros(len(preds))
    for i in range(len(preds)):
        best_j = -1
        best_iou = 0.0
        for j in range(n_gt):
            # equal IoU keeps the smaller j that already holds the slot
            if not matched[j] and iou[i, j] >= thr and iou[i, j] > best_iou:
                best_iou = iou[i, j]
                best_j = j
        if best_j >= 0:
            matched[best_j] = True
            tp[i] = 1.0
    cum_tp = np.cumsum(tp)
    cum_fp = np.cumsum(1.0 - tp)
    recall = cum_tp / n_gt
    precision = cum_tp / np.maximum(cum_tp + cum_fp, 1e-12)
    ap = 0.0
    for r in RECALL_POINTS:
        ok = precision[recall >= r]
        ap += float(ok.max()) if ok.size else 0.0
    return ap / len(RECALL_POINTS)


def mask_ap(preds, gts) -> APReport:
    """COCO-style mask AP over IoU thresholds 0.50:0.05:0.95.

    Matching is greedy in descending score order (ties by instance id)
    against unmatched ground truths of the same class, best IoU first.
    Class means run over the classes present in the ground truth;
    predictions for absent classes are ignored.
    """
    for p in preds:
        if p.score is None or not np.isfinite(p.score):
            raise ValueError(f"prediction {p.id} has no usable score")
    gt_classes = sorted({g.label for g in gts})
    if not gt_classes:
        return APReport(0.0, 0.0, 0.0, {})
    per_class = {}
    for cls in gt_classes:
        cls_preds = sorted(
            [p for p in preds if p.label == cls],
            key=lambda p: (-p.score, p.id),
        )
        cls_gts = sorted([g for g in gts if g.label == cls], key=lambda g: g.id)
        if not cls_preds:
            per_class[cls] = (0.0, 0.0, 0.0)
            continue
        iou = np.zeros((len(cls_preds), len(cls_gts)))
        for i, p in enumerate(cls_preds):
            for j, g in enumerate(cls_gts):
                iou[i, j] = mask_iou(p.mask, g.mask)
        by_thr = [_class_ap(cls_preds, cls_gts, iou, t) for t in IOU_THRESHOLDS]
        per_class[cls] = (
            float(np.mean(by_thr)),
            by_thr[0],                                   # 0.50
            by_thr[int(np.where(np.isclose(IOU_THRESHOLDS, 0.75))[0][0])],
        )
    ap = float(np.mean([v[0] for v in per_class.values()]))
    ap50 = float(np.mean([v[1] for v in per_class.values()]))
    ap75 = float(np.mean([v[2] for v in per_class.values()]))
    return APReport(ap=ap, ap50=ap50, ap75=ap75, per_class=per_class)


# ---------------------------------------------------------------------------
# toy segmenter: a dilated FCN stand-in so the pipeline can run end to end

class ToySegmenter(nn.Module):
    """Small dilated fully-convolutional per-pixel classifier."""

    def __init__(self, channels: int = 32, num_classes: int = NUM_CLASSES):
        super().__init__()
        self.num_classes = num_classes
        c = channels
        self.body = nn.Sequential(
            nn.Conv2d(1, c, 3, padding=1), nn.ReLU(inplace=True),
            nn.Conv2d(c, 2 * c, 3, padding=2, dilation=2), nn.ReLU(inplace=True),
            nn.Conv2d(2 * c, 2 * c, 3, padding=4, dilation=4), nn.ReLU(inplace=True),
            nn.Conv2d(2 * c, 2 * c, 3, padding=8, dilation=8), nn.ReLU(inplace=True),
            nn.Conv2d(2 * c, 2 * c, 3, padding=4, dilation=4), nn.ReLU(inplace=True),
            nn.Conv2d(2 * c, c, 3, padding=1), nn.ReLU(inplace=True),
        )
        self.head = nn.Conv2d(c, num_classes + 1, 1)

    def forward(self, x):
        return self.head(self.body(x))


def toy_segmenter_infer(model: ToySegmenter, sketch) -> SegPrediction:
    """Per-pixel logits for one sketch; deterministic given the weights."""
    pixels = sketch.pixels if hasattr(sketch, "pixels") else np.asarray(sketch)
    was_training = model.training
    model.eval()
    with torch.no_grad():
        x = torch.from_numpy(pixels.astype(np.float32))[None, None]
        logits = model(x)[0].permute(1, 2, 0).numpy()
    if was_training:
        model.train()
    return SegPrediction(logits=logits, source="toy segmenter")


def toy_segmenter_train(config):
    """Train the stand-in segmenter; see the trainer module for the loop."""
    from .trainer import train_toy_segmenter

    return train_toy_segmenter(config)
