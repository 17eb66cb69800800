"""Edgelist refinement: skeletonize, cluster strokes, vote class labels.

A sketch is reduced to a single-pixel skeleton, the skeleton is split
into edge segments at junctions and endpoints, every foreground pixel
joins the cluster of its nearest skeleton pixel, and each cluster takes
the majority class label of its pixels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import BACKGROUND_ID, SketchImage

# 8-neighborhood offsets in clockwise order starting north; tracing visits
# them in this fixed order so paths come out deterministic
_NEIGHBORS = (
    (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1),
)


@dataclass
class Skeleton:
    """1-px skeleton pixels partitioned into segments.

    Each segment lists a traced walk of non-junction pixels; absorbed
    junction pixels sit at the flanks and may break strict adjacency
    when several junctions attach to the same end.
    """

    pixels: np.ndarray          # uint8 grid, 1 = skeleton pixel
    segments: list              # list of [(row, col), ...], index i is id i+1
    segment_map: np.ndarray     # int32 grid, 0 = not skeleton, else segment id


@dataclass
class ClusterMap:
    """Per-pixel segment assignment; 0 = background / unassigned."""

    cluster_id: np.ndarray      # int32 grid


def _neighbor_list(sk: np.ndarray, r: int, c: int):
    h, w = sk.shape
    out = []
    for dr, dc in _NEIGHBORS:
        rr, cc = r + dr, c + dc
        if 0 <= rr < h and 0 <= cc < w and sk[rr, cc]:
            out.append((rr, cc))
    return out


def _trace_paths(sk: np.ndarray, body: np.ndarray):
    """Ordered paths of the body pixels (skeleton minus junctions).

    Every body pixel has at most 2 body neighbors, so each connected
    body component is a simple path or cycle. Paths start at the
    lexicographically smallest endpoint (smallest degree-≤1 pixel);
    cycles start at their smallest pixel and walk toward the smaller
    neighbor first.
    """
    h, w = body.shape
    degree = np.zeros((h, w), dtype=np.int8)
    rows, cols = np.nonzero(body)
    for r, c in zip(rows.tolist(), cols.tolist()):
        n = 0
        for dr, dc in _NEIGHBORS:
            rr, cc = r + dr, c + dc
            if 0 <= rr < h and 0 <= cc < w and body[rr, cc]:
                n += 1
        degree[r, c] = n

    visited = np.zeros((h, w), dtype=bool)
    paths = []
    order = sorted(zip(rows.tolist(), cols.tolist()))
    # endpoints first so open paths are traced end to end
    for start in [p for p in order if degree[p] <= 1] + order:
        if visited[start]:
            continue
        path = [start]
        visited[start] = True
        cur = start
        while True:
            nxt = None
            for dr, dc in _NEIGHBORS:
                rr, cc = cur[0] + dr, cur[1] + dc
                if 0 <= rr < h and 0 <= cc < w and body[rr, cc] and not visited[rr, cc]:
                    if nxt is None or (rr, cc) < nxt:
                        nxt = (rr, cc)
            if nxt is None:
                break
            path.append(nxt)
            visited[nxt] = True
            cur = nxt
        paths.append(path)
    return paths


def extract_skeleton(sketch: SketchImage) -> Skeleton:
    """Thin the sketch to 1 px and split it into edge segments.

    Junction pixels (≥3 skeleton neighbors) cut the skeleton; each
    junction is then absorbed into the adjacent segment with the
    smallest id, or becomes its own segment when it touches none.
    Segment ids are 1-based and ordered by each segment's smallest
    pixel, so the decomposition is deterministic.
    """
    if not sketch.pixels.any():
        raise ValueError("cannot skeletonize an empty sketch")
    sk = kernels.thin(sketch.pixels)
    h, w = sk.shape

    degree = np.zeros((h, w), dtype=np.int8)
    rows, cols = np.nonzero(sk)
    for r, c in zip(rows.tolist(), cols.tolist()):
        degree[r, c] = len(_neighbor_list(sk, r, c))
    junction = (sk > 0) & (degree >= 3)
    body = (sk > 0) & ~junction

    raw = _trace_paths(sk, body)

    # attach each junction pixel to the touching path with the smallest
    # start pixel, extending that path at whichever end it touches
    jlist = sorted(zip(*np.nonzero(junction)))
    attached = {}
    for jr, jc in jlist:
        best = None
        for idx, path in enumerate(raw):
            for end in (0, len(path) - 1):
                er, ec = path[end]
                if max(abs(er - jr), abs(ec - jc)) == 1:
                    cand = (path[0], idx, end)
                    if best is None or cand < best:
                        best = cand
        if best is not None:
            attached[(jr, jc)] = (best[1], best[2])

    segments = []
    for idx, path in enumerate(raw):
        segments.append(list(path))
    for (jr, jc), (idx, end) in sorted(attached.items()):
        if end == 0:
            segments[idx].insert(0, (jr, jc))
        else:
            segments[idx].append((jr, jc))
    # junctions touching no path (isolated junction clusters) group into
    # 8-connected components of their own
    leftovers = set(jlist) - set(attached)
    taken = set()
    for seed in sorted(leftovers):
        if seed in taken:
            continue
        comp = [seed]
        taken.add(seed)
        queue = [seed]
        while queue:
            r, c = queue.pop()
            for dr, dc in _NEIGHBORS:
                nb = (r + dr, c + dc)
                if nb in leftovers and nb not in taken:
                    taken.add(nb)
                    comp.append(nb)
                    queue.append(nb)
        segments.append(sorted(comp))

    segments.sort(key=lambda s: min(s))
    segment_map = np.zeros((h, w), dtype=np.int32)
    for i, seg in enumerate(segments, start=1):
        for r, c in seg:
            segment_map[r, c] = i
    return Skeleton(pixels=sk, segments=segments, segment_map=segment_map)


def cluster_pixels(sketch: SketchImage, skeleton: Skeleton) -> ClusterMap:
    """Assign every stroke pixel the segment of its nearest skeleton pixel.

    Distance is Euclidean between pixel centers; ties go to the smaller
    segment id.
    """
    fg = sketch.pixels > 0
    out = np.zeros(fg.shape, dtype=np.int32)
    fr, fc = np.nonzero(fg)
    sr, sc = np.nonzero(skeleton.segment_map)
    sid = skeleton.segment_map[sr, sc].astype(np.int64)
    out[fr, fc] = kernels.nearest_assign(
        fr.astype(np.int64), fc.astype(np.int64),
        sr.astype(np.int64), sc.astype(np.int64), sid,
    )
    return ClusterMap(cluster_id=out)


def majority_relabel(labels: np.ndarray, clusters: ClusterMap, diagnostics=None) -> np.ndarray:
    """One class label per cluster, by majority vote.

    Background votes (label 0) are ignored; ties break to the smallest
    class id. A cluster whose pixels are all background-labeled keeps
    its labels untouched and its id is appended to ``diagnostics`` when
    a list is supplied.
    """
    labels = np.asarray(labels)
    cid = clusters.cluster_id
    if labels.shape != cid.shape:
        raise ValueError(
            f"labels shape {labels.shape} does not match clusters {cid.shape}"
        )
    out = labels.copy()
    for seg in np.unique(cid):
        if seg == 0:
            continue
        sel = cid == seg
        votes = labels[sel]
        votes = votes[votes != BACKGROUND_ID]
        if votes.size == 0:
            if diagnostics is not None:
                diagnostics.append(int(seg))
            continue
        vals, counts = np.unique(votes, return_counts=True)
        winner = vals[counts == counts.max()].min()
        out[sel] = winner
    return out


def refine_labels(sketch: SketchImage, labels: np.ndarray, diagnostics=None) -> np.ndarray:
    """Full post-process: skeleton, clusters, then the majority vote."""
    skeleton = extract_skeleton(sketch)
    clusters = cluster_pixels(sketch, skeleton)
    return majority_relabel(labels, clusters, diagnostics=diagnostics)
