"""Pure-numpy implementations of the hot kernels.

These mirror ``_kernels.pyx`` exactly (same visiting order, same float
operation order) so both backends return identical results.
"""

import numpy as np


def _neighbours(img):
    """P2..P9 planes of a zero-padded image, clockwise from north."""
    c = img[1:-1, 1:-1]
    p2 = img[:-2, 1:-1]
    p3 = img[:-2, 2:]
    p4 = img[1:-1, 2:]
    p5 = img[2:, 2:]
    p6 = img[2:, 1:-1]
    p7 = img[2:, :-2]
    p8 = img[1:-1, :-2]
    p9 = img[:-2, :-2]
    return c, (p2, p3, p4, p5, p6, p7, p8, p9)


def _removable_at(img, r, c, step):
    p2 = img[r - 1, c]
    p3 = img[r - 1, c + 1]
    p4 = img[r, c + 1]
    p5 = img[r + 1, c + 1]
    p6 = img[r + 1, c]
    p7 = img[r + 1, c - 1]
    p8 = img[r, c - 1]
    p9 = img[r - 1, c - 1]
    ring = (p2, p3, p4, p5, p6, p7, p8, p9, p2)
    b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9
    if b < 2 or b > 6:
        return False
    a = 0
    for k in range(8):
        if ring[k] == 0 and ring[k + 1] == 1:
            a += 1
    if a != 1:
        return False
    if step == 0:
        return p2 * p4 * p6 == 0 and p4 * p6 * p8 == 0
    return p2 * p4 * p8 == 0 and p2 * p6 * p8 == 0


def zhang_suen(mask):
    """Thin a boolean mask to a one-pixel-wide skeleton.

    Each sub-iteration flags Zhang-Suen candidates in parallel, then commits
    them in raster order, re-checking the conditions on the live image. The
    re-check stops the classic parallel pass from erasing 2x2 blocks or
    splitting components.
    """
    mask = np.asarray(mask, dtype=bool)
    img = np.zeros((mask.shape[0] + 2, mask.shape[1] + 2), dtype=np.uint8)
    img[1:-1, 1:-1] = mask
    changed = True
    while changed:
        changed = False
        for step in (0, 1):
            c, (p2, p3, p4, p5, p6, p7, p8, p9) = _neighbours(img)
            b = (p2.astype(np.int16) + p3 + p4 + p5 + p6 + p7 + p8 + p9)
            ring = (p2, p3, p4, p5, p6, p7, p8, p9, p2)
            a = np.zeros(c.shape, dtype=np.int16)
            for k in range(8):
                a += (ring[k] == 0) & (ring[k + 1] == 1)
            if step == 0:
                directional = ((p2 & p4 & p6) == 0) & ((p4 & p6 & p8) == 0)
            else:
                directional = ((p2 & p4 & p8) == 0) & ((p2 & p6 & p8) == 0)
            flagged = (c == 1) & (b >= 2) & (b <= 6) & (a == 1) & directional
            for r, col in np.argwhere(flagged):
                if _removable_at(img, r + 1, col + 1, step):
                    img[r + 1, col + 1] = 0
                    changed = True
    return img[1:-1, 1:-1].astype(bool)


def _lex_less(a, b):
    for k in range(3):
        if a[k] < b[k]:
            return True
        if a[k] > b[k]:
            return False
    return False


def farthest_pair(points, chunk=512):
    """Indices ``(i, j)`` of the pair with maximal squared distance.

    Ties are broken on the lexicographically smallest canonical pair, and
    ``points[i]`` is lexicographically <= ``points[j]``.
    """
    pts = np.ascontiguousarray(points, dtype=np.float64)
    n = pts.shape[0]
    best = -1.0
    cands = []
    for start in range(0, n, chunk):
        blk = pts[start:start + chunk]
        dx = blk[:, None, 0] - pts[None, :, 0]
        dy = blk[:, None, 1] - pts[None, :, 1]
        dz = blk[:, None, 2] - pts[None, :, 2]
        d2 = dx * dx + dy * dy + dz * dz
        rows = np.arange(start, start + blk.shape[0])
        d2[np.arange(n)[None, :] <= rows[:, None]] = -1.0
        m = d2.max() if d2.size else -1.0
        if m > best:
            best = m
            cands = []
        if m == best and m >= 0:
            ii, jj = np.nonzero(d2 == m)
            cands.extend(zip((ii + start).tolist(), jj.tolist()))
    best_pair = None
    best_key = None
    for i, j in sorted(cands):
        lo, hi = (i, j) if not _lex_less(pts[j], pts[i]) else (j, i)
        key = (tuple(pts[lo]), tuple(pts[hi]))
        if best_key is None or key < best_key:
            best_key = key
            best_pair = (lo, hi)
    return best_pair
