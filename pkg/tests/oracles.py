"""Independent reference implementations used only to check the package.

Everything here is written for clarity over speed: plain loops, no
shared code with the implementations under test.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


# ---------------------------------------------------------------------------
# geometry oracles

def flood_exterior_oracle(mask: np.ndarray) -> np.ndarray:
    """BFS from every background border pixel, 4-connectivity."""
    h, w = mask.shape
    out = np.zeros((h, w), dtype=np.uint8)
    queue = []
    for r in range(h):
        for c in range(w):
            if (r in (0, h - 1) or c in (0, w - 1)) and mask[r, c] == 0:
                if not out[r, c]:
                    out[r, c] = 1
                    queue.append((r, c))
    while queue:
        r, c = queue.pop()
        for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            rr, cc = r + dr, c + dc
            if 0 <= rr < h and 0 <= cc < w and mask[rr, cc] == 0 \
                    and not out[rr, cc]:
                out[rr, cc] = 1
                queue.append((rr, cc))
    return out


def nearest_assign_oracle(foreground: np.ndarray,
                          segment_map: np.ndarray) -> np.ndarray:
    """Per foreground pixel: smallest (squared distance, segment id)."""
    h, w = foreground.shape
    skel = [(r, c, int(segment_map[r, c]))
            for r in range(h) for c in range(w) if segment_map[r, c] > 0]
    if not skel:
        raise ValueError("empty skeleton")
    out = np.zeros((h, w), dtype=np.int64)
    for r in range(h):
        for c in range(w):
            if not foreground[r, c]:
                continue
            best = None
            for sr, sc, sid in skel:
                key = ((sr - r) ** 2 + (sc - c) ** 2, sid)
                if best is None or key < best:
                    best = key
            out[r, c] = best[1]
    return out


# ---------------------------------------------------------------------------
# losses

def pixel_list_cross_entropy(logits: np.ndarray, target: np.ndarray,
                             mask: np.ndarray) -> float:
    """Mean CE over the explicit list of foreground pixels, float64."""
    total = 0.0
    count = 0
    h, w = mask.shape
    for r in range(h):
        for c in range(w):
            if not mask[r, c]:
                continue
            row = logits[r, c].astype(np.float64)
            m = row.max()
            logsum = m + math.log(np.exp(row - m).sum())
            total += logsum - row[int(target[r, c])]
            count += 1
    if count == 0:
        raise ValueError("no foreground pixels")
    return total / count


def central_difference(fn, tensor, eps: float = 1e-6) -> np.ndarray:
    """d fn / d tensor entry-by-entry via central differences."""
    import torch

    grad = np.zeros(tensor.numel(), dtype=np.float64)
    flat = tensor.detach().reshape(-1)
    for i in range(flat.numel()):
        orig = float(flat[i])
        with torch.no_grad():
            flat[i] = orig + eps
            hi = float(fn())
            flat[i] = orig - eps
            lo = float(fn())
            flat[i] = orig
        grad[i] = (hi - lo) / (2 * eps)
    return grad.reshape(tuple(tensor.shape))


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float((np.abs(analytic - numeric) / denom).max())


# ---------------------------------------------------------------------------
# mask AP oracle

def _iou(a: np.ndarray, b: np.ndarray) -> float:
    inter = int(np.logical_and(a, b).sum())
    union = int(np.logical_or(a, b).sum())
    return inter / union if union else 0.0


def _match_by_definition(preds, gts, thr: float):
    """The matching the protocol defines, verified by enumeration.

    Predictions are visited in (-score, id) order; each must take the
    unmatched ground truth with the highest IoU >= thr (ties to the
    smaller gt index) or none. All injective assignments are
    enumerated and exactly one must satisfy that rule.
    """
    order = sorted(range(len(preds)), key=lambda i: (-preds[i].score,
                                                     preds[i].id))
    ious = [[(_iou(preds[i].mask, g.mask)) for g in gts] for i in order]

    choices = []   # per pred in order: candidate gt indices or None
    for row in ious:
        cand = [j for j in range(len(gts))] + [None]
        choices.append(cand)
    valid = []
    for combo in itertools.product(*choices):
        taken = [j for j in combo if j is not None]
        if len(set(taken)) != len(taken):
            continue
        # check the greedy property prefix by prefix
        used = set()
        ok = True
        for pos, j in enumerate(combo):
            avail = [k for k in range(len(gts)) if k not in used]
            best = None
            for k in avail:
                if ious[pos][k] >= thr:
                    key = (-ious[pos][k], k)
                    if best is None or key < best:
                        best = key
            expected = None if best is None else best[1]
            if j != expected:
                ok = False
                break
            if j is not None:
                used.add(j)
        if ok:
            valid.append(combo)
    assert len(valid) == 1, f"matching rule not unique: {len(valid)}"
    matched = valid[0]
    flags = [matched[pos] is not None for pos in range(len(order))]
    return flags  # TP flags in score order


def ap_101(flags, n_gt: int) -> float:
    """101-point interpolated AP from TP flags in score order."""
    if n_gt == 0:
        return 0.0
    precisions = []
    recalls = []
    tp = 0
    for i, flag in enumerate(flags):
        tp += bool(flag)
        precisions.append(tp / (i + 1))
        recalls.append(tp / n_gt)
    ap = 0.0
    for r in np.linspace(0, 1, 101):
        best = 0.0
        for p, rec in zip(precisions, recalls):
            if rec >= r and p > best:
                best = p
        ap += best / 101
    return ap


def mask_ap_oracle(preds, gts):
    """Class-mean AP over thresholds 0.50:0.05:0.95, by enumeration."""
    classes = sorted({g.label for g in gts})
    if not classes:
        return 0.0, 0.0, 0.0
    thresholds = [0.5 + 0.05 * k for k in range(10)]
    per_thr = {t: [] for t in thresholds}
    for cls in classes:
        cp = [p for p in preds if p.label == cls]
        cg = [g for g in gts if g.label == cls]
        for thr in thresholds:
            if not cp:
                per_thr[thr].append(0.0)
                continue
            flags = _match_by_definition(cp, cg, thr)
            per_thr[thr].append(ap_101(flags, len(cg)))
    means = {t: float(np.mean(v)) for t, v in per_thr.items()}
    ap = float(np.mean(list(means.values())))
    return ap, means[0.5], means[0.75]
