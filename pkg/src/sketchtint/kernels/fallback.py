"""NumPy reference implementations of the raster kernels.

This is the pure-Python lane. The compiled lane in ``_native`` must agree
with these functions bit for bit; ``sketchtint.kernels`` picks one at
import time. Everything here works on small arrays too, so the tests use
this module as the ground truth for the compiled code.
"""

import numpy as np
from scipy import ndimage

_FOUR_CONN = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


def thin(grid: np.ndarray) -> np.ndarray:
    """Two-subiteration morphological thinning (Guo-Hall) to 1-px width.

    Deletions within a subiteration are parallel: the decision for every
    pixel is taken on the grid as it stood when the subiteration began.
    """
    g = grid.astype(bool)
    changed = True
    while changed:
        changed = False
        for phase in (0, 1):
            p = np.pad(g, 1)
            n = p[:-2, 1:-1]
            ne = p[:-2, 2:]
            e = p[1:-1, 2:]
            se = p[2:, 2:]
            s = p[2:, 1:-1]
            sw = p[2:, :-2]
            w = p[1:-1, :-2]
            nw = p[:-2, :-2]
            c = (
                (~n & (ne | e)).astype(np.uint8)
                + (~e & (se | s))
                + (~s & (sw | w))
                + (~w & (nw | n))
            )
            n1 = (nw | n).astype(np.uint8) + (ne | e) + (se | s) + (sw | w)
            n2 = (n | ne).astype(np.uint8) + (e | se) + (s | sw) + (w | nw)
            nmin = np.minimum(n1, n2)
            if phase == 0:
                stuck = (s | sw | ~nw) & w
            else:
                stuck = (n | ne | ~se) & e
            delete = g & (c == 1) & (nmin >= 2) & (nmin <= 3) & ~stuck
            if delete.any():
                g &= ~delete
                changed = True
    return g.astype(np.uint8)


def flood_exterior(grid: np.ndarray) -> np.ndarray:
    """4-connected flood of the background (0) pixels reachable from the border.

    Returns 1 where the pixel is exterior background, 0 elsewhere (strokes
    and enclosed background both map to 0).
    """
    bg = grid == 0
    labels, count = ndimage.label(bg, structure=_FOUR_CONN)
    if count == 0:
        return np.zeros_like(grid, dtype=np.uint8)
    border = np.concatenate(
        [labels[0, :], labels[-1, :], labels[:, 0], labels[:, -1]]
    )
    touching = np.unique(border[border > 0])
    return np.isin(labels, touching).astype(np.uint8)


def nearest_assign(
    fg_rows: np.ndarray,
    fg_cols: np.ndarray,
    sk_rows: np.ndarray,
    sk_cols: np.ndarray,
    seg_ids: np.ndarray,
) -> np.ndarray:
    """Exact nearest-skeleton-pixel assignment.

    For each query pixel, returns the segment id of the closest skeleton
    pixel under squared Euclidean distance on integer pixel centers; ties
    are broken by the smallest segment id. Brute force, chunked so the
    broadcast stays within a bounded working set.
    """
    if len(sk_rows) == 0:
        raise ValueError("nearest_assign needs at least one skeleton pixel")
    fr = fg_rows.astype(np.int64)
    fc = fg_cols.astype(np.int64)
    sr = sk_rows.astype(np.int64)
    sc = sk_cols.astype(np.int64)
    sid = seg_ids.astype(np.int64)
    # lexicographic (distance, id) minimum via a single combined integer key
    base = int(sid.max()) + 1
    out = np.empty(len(fr), dtype=np.int32)
    chunk = max(1, int(4_000_000 // max(1, len(sr))))
    for lo in range(0, len(fr), chunk):
        hi = min(lo + chunk, len(fr))
        d2 = (fr[lo:hi, None] - sr[None, :]) ** 2 + (fc[lo:hi, None] - sc[None, :]) ** 2
        key = d2 * base + sid[None, :]
        out[lo:hi] = sid[np.argmin(key, axis=1)].astype(np.int32)
    return out


def rle_encode(mask: np.ndarray) -> np.ndarray:
    """Column-major run-length counts; the first run counts zeros (may be 0)."""
    flat = mask.astype(np.uint8).flatten(order="F")
    if flat.size == 0:
        return np.zeros(0, dtype=np.int64)
    breaks = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate([[0], breaks, [flat.size]])
    counts = np.diff(bounds).astype(np.int64)
    if flat[0] == 1:
        counts = np.concatenate([[0], counts])
    return counts


def rle_decode(counts: np.ndarray, height: int, width: int) -> np.ndarray:
    """Inverse of :func:`rle_encode`; raises if counts do not fill the grid."""
    counts = np.asarray(counts, dtype=np.int64)
    if counts.size and counts[1:].min(initial=1) <= 0:
        raise ValueError("run lengths after the first must be positive")
    total = int(counts.sum())
    if total != height * width:
        raise ValueError(
            f"run lengths sum to {total}, expected {height * width}"
        )
    values = np.zeros(counts.size, dtype=np.uint8)
    values[1::2] = 1
    flat = np.repeat(values, counts)
    return flat.reshape((height, width), order="F")
