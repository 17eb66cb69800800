# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled raster kernels.

Each function matches the numpy lane in ``fallback.py`` bit for bit; the
tests enforce the equivalence on randomized inputs.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def thin(grid):
    """Two-subiteration morphological thinning (Guo-Hall) to 1-px width."""
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] g = np.ascontiguousarray(
        np.asarray(grid) != 0, dtype=np.uint8)
    cdef int h = g.shape[0]
    cdef int w = g.shape[1]
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] p = np.zeros((h + 2, w + 2), dtype=np.uint8)
    p[1:h + 1, 1:w + 1] = g
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] mark = np.zeros((h + 2, w + 2), dtype=np.uint8)
    cdef int changed = 1
    cdef int phase, i, j, c, n1, n2, nmin, stuck, nmarked
    cdef int pn, pne, pe, pse, ps, psw, pw, pnw
    while changed:
        changed = 0
        for phase in range(2):
            nmarked = 0
            for i in range(1, h + 1):
                for j in range(1, w + 1):
                    if p[i, j] == 0:
                        continue
                    pn = p[i - 1, j]
                    pne = p[i - 1, j + 1]
                    pe = p[i, j + 1]
                    pse = p[i + 1, j + 1]
                    ps = p[i + 1, j]
                    psw = p[i + 1, j - 1]
                    pw = p[i, j - 1]
                    pnw = p[i - 1, j - 1]
                    c = (((not pn) and (pne or pe)) + ((not pe) and (pse or ps))
                         + ((not ps) and (psw or pw)) + ((not pw) and (pnw or pn)))
                    n1 = (pnw or pn) + (pne or pe) + (pse or ps) + (psw or pw)
                    n2 = (pn or pne) + (pe or pse) + (ps or psw) + (pw or pnw)
                    nmin = n1 if n1 < n2 else n2
                    if phase == 0:
                        stuck = (ps or psw or (not pnw)) and pw
                    else:
                        stuck = (pn or pne or (not pse)) and pe
                    if c == 1 and 2 <= nmin <= 3 and not stuck:
                        mark[i, j] = 1
                        nmarked += 1
            if nmarked:
                changed = 1
                for i in range(1, h + 1):
                    for j in range(1, w + 1):
                        if mark[i, j]:
                            p[i, j] = 0
                            mark[i, j] = 0
    return np.ascontiguousarray(p[1:h + 1, 1:w + 1])


def flood_exterior(grid):
    """4-connected flood of border-reachable background; 1 = exterior."""
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] g = np.ascontiguousarray(
        np.asarray(grid) != 0, dtype=np.uint8)
    cdef int h = g.shape[0]
    cdef int w = g.shape[1]
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] ext = np.zeros((h, w), dtype=np.uint8)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] queue = np.empty(h * w, dtype=np.int64)
    cdef Py_ssize_t head = 0, tail = 0
    cdef int i, j, r, c
    for j in range(w):
        if g[0, j] == 0 and ext[0, j] == 0:
            ext[0, j] = 1
            queue[tail] = j
            tail += 1
        if g[h - 1, j] == 0 and ext[h - 1, j] == 0:
            ext[h - 1, j] = 1
            queue[tail] = (h - 1) * w + j
            tail += 1
    for i in range(h):
        if g[i, 0] == 0 and ext[i, 0] == 0:
            ext[i, 0] = 1
            queue[tail] = i * w
            tail += 1
        if g[i, w - 1] == 0 and ext[i, w - 1] == 0:
            ext[i, w - 1] = 1
            queue[tail] = i * w + w - 1
            tail += 1
    while head < tail:
        r = <int>(queue[head] // w)
        c = <int>(queue[head] % w)
        head += 1
        if r > 0 and g[r - 1, c] == 0 and ext[r - 1, c] == 0:
            ext[r - 1, c] = 1
            queue[tail] = (r - 1) * w + c
            tail += 1
        if r < h - 1 and g[r + 1, c] == 0 and ext[r + 1, c] == 0:
            ext[r + 1, c] = 1
            queue[tail] = (r + 1) * w + c
            tail += 1
        if c > 0 and g[r, c - 1] == 0 and ext[r, c - 1] == 0:
            ext[r, c - 1] = 1
            queue[tail] = r * w + c - 1
            tail += 1
        if c < w - 1 and g[r, c + 1] == 0 and ext[r, c + 1] == 0:
            ext[r, c + 1] = 1
            queue[tail] = r * w + c + 1
            tail += 1
    return ext


def nearest_assign(fg_rows, fg_cols, sk_rows, sk_cols, seg_ids):
    """Exact nearest-skeleton assignment; ties to the smallest segment id."""
    cdef cnp.ndarray[cnp.int64_t, ndim=1] fr = np.ascontiguousarray(fg_rows, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] fc = np.ascontiguousarray(fg_cols, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] sr = np.ascontiguousarray(sk_rows, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] sc = np.ascontiguousarray(sk_cols, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] sid = np.ascontiguousarray(seg_ids, dtype=np.int64)
    cdef Py_ssize_t nf = fr.shape[0]
    cdef Py_ssize_t ns = sr.shape[0]
    if ns == 0:
        raise ValueError("nearest_assign needs at least one skeleton pixel")
    cdef cnp.ndarray[cnp.int32_t, ndim=1] out = np.empty(nf, dtype=np.int32)
    cdef Py_ssize_t i, k
    cdef long long best_d2, best_id, d2, dr, dc
    for i in range(nf):
        best_d2 = -1
        best_id = -1
        for k in range(ns):
            dr = fr[i] - sr[k]
            dc = fc[i] - sc[k]
            d2 = dr * dr + dc * dc
            if best_d2 < 0 or d2 < best_d2 or (d2 == best_d2 and sid[k] < best_id):
                best_d2 = d2
                best_id = sid[k]
        out[i] = <cnp.int32_t>best_id
    return out


def rle_encode(mask):
    """Column-major run-length counts; the first run counts zeros."""
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] flat = np.ascontiguousarray(
        np.asarray(mask, dtype=np.uint8).flatten(order="F"))
    cdef Py_ssize_t n = flat.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] buf = np.zeros(n + 1, dtype=np.int64)
    cdef Py_ssize_t nruns = 0
    cdef int cur = 0
    cdef Py_ssize_t i
    cdef long long run = 0
    for i in range(n):
        if flat[i] == cur:
            run += 1
        else:
            buf[nruns] = run
            nruns += 1
            cur = 1 - cur
            run = 1
    buf[nruns] = run
    nruns += 1
    return buf[:nruns].copy()


def rle_decode(counts, height, width):
    """Inverse of :func:`rle_encode`; raises if counts do not fill the grid."""
    cdef cnp.ndarray[cnp.int64_t, ndim=1] c = np.ascontiguousarray(counts, dtype=np.int64)
    cdef Py_ssize_t nruns = c.shape[0]
    cdef Py_ssize_t h = height, w = width
    cdef Py_ssize_t i, j, pos = 0
    cdef long long total = 0
    for i in range(nruns):
        if i > 0 and c[i] <= 0:
            raise ValueError("run lengths after the first must be positive")
        total += c[i]
    if total != h * w:
        raise ValueError(f"run lengths sum to {total}, expected {h * w}")
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] flat = np.zeros(h * w, dtype=np.uint8)
    cdef int val = 0
    for i in range(nruns):
        if val:
            for j in range(c[i]):
                flat[pos + j] = 1
        pos += c[i]
        val = 1 - val
    return flat.reshape((h, w), order="F")
