# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_kernels_py`` for the reference semantics."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline bint _removable(unsigned char[:, ::1] img, Py_ssize_t r, Py_ssize_t c, int step) noexcept nogil:
    cdef unsigned char p2 = img[r - 1, c]
    cdef unsigned char p3 = img[r - 1, c + 1]
    cdef unsigned char p4 = img[r, c + 1]
    cdef unsigned char p5 = img[r + 1, c + 1]
    cdef unsigned char p6 = img[r + 1, c]
    cdef unsigned char p7 = img[r + 1, c - 1]
    cdef unsigned char p8 = img[r, c - 1]
    cdef unsigned char p9 = img[r - 1, c - 1]
    cdef int b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9
    cdef int a = 0
    if b < 2 or b > 6:
        return False
    a = ((p2 == 0 and p3 == 1) + (p3 == 0 and p4 == 1) + (p4 == 0 and p5 == 1)
         + (p5 == 0 and p6 == 1) + (p6 == 0 and p7 == 1) + (p7 == 0 and p8 == 1)
         + (p8 == 0 and p9 == 1) + (p9 == 0 and p2 == 1))
    if a != 1:
        return False
    if step == 0:
        return p2 * p4 * p6 == 0 and p4 * p6 * p8 == 0
    return p2 * p4 * p8 == 0 and p2 * p6 * p8 == 0


def zhang_suen(mask):
    cdef cnp.ndarray m = np.asarray(mask, dtype=bool)
    cdef Py_ssize_t h = m.shape[0], w = m.shape[1]
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] buf = np.zeros((h + 2, w + 2), dtype=np.uint8)
    buf[1:-1, 1:-1] = m
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] fbuf = np.zeros((h + 2, w + 2), dtype=np.uint8)
    cdef unsigned char[:, ::1] img = buf
    cdef unsigned char[:, ::1] flag = fbuf
    cdef Py_ssize_t r, c
    cdef int step
    cdef bint changed = True
    with nogil:
        while changed:
            changed = False
            for step in range(2):
                for r in range(1, h + 1):
                    for c in range(1, w + 1):
                        flag[r, c] = img[r, c] == 1 and _removable(img, r, c, step)
                for r in range(1, h + 1):
                    for c in range(1, w + 1):
                        if flag[r, c] and _removable(img, r, c, step):
                            img[r, c] = 0
                            changed = True
    return buf[1:-1, 1:-1].astype(bool)


cdef inline bint _lex_less(double[:, ::1] p, Py_ssize_t a, Py_ssize_t b) noexcept nogil:
    cdef int k
    for k in range(3):
        if p[a, k] < p[b, k]:
            return True
        if p[a, k] > p[b, k]:
            return False
    return False


cdef inline bint _pair_less(double[:, ::1] p, Py_ssize_t a0, Py_ssize_t a1,
                            Py_ssize_t b0, Py_ssize_t b1) noexcept nogil:
    if _lex_less(p, a0, b0):
        return True
    if _lex_less(p, b0, a0):
        return False
    return _lex_less(p, a1, b1)


def farthest_pair(points):
    cdef double[:, ::1] p = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t n = p.shape[0]
    cdef Py_ssize_t i, j, lo, hi
    cdef Py_ssize_t best_lo = -1, best_hi = -1
    cdef double dx, dy, dz, d2
    cdef double best = -1.0
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                dx = p[i, 0] - p[j, 0]
                dy = p[i, 1] - p[j, 1]
                dz = p[i, 2] - p[j, 2]
                d2 = dx * dx + dy * dy + dz * dz
                if d2 < best:
                    continue
                if _lex_less(p, j, i):
                    lo = j
                    hi = i
                else:
                    lo = i
                    hi = j
                if d2 > best or _pair_less(p, lo, hi, best_lo, best_hi):
                    best = d2
                    best_lo = lo
                    best_hi = hi
    if best_lo < 0:
        return None
    return (int(best_lo), int(best_hi))
