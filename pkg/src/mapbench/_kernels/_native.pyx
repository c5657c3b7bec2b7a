# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels (thinning, ray-cast visibility).

Must stay bit-identical to _pyfallback; floating-point expressions mirror
the fallback's evaluation order and the build disables FP contraction.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def thin(img):
    """Zhang-Suen two-subiteration thinning to fixpoint."""
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] sk = (np.asarray(img) != 0).astype(np.uint8)
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] mark = np.zeros_like(sk)
    cdef Py_ssize_t h = sk.shape[0], w = sk.shape[1]
    cdef Py_ssize_t r, c, k
    cdef int step, b, a, changed, any_deleted
    cdef int p[9]
    cdef cnp.uint8_t[:, ::1] s = sk
    cdef cnp.uint8_t[:, ::1] m = mark

    while True:
        changed = 0
        for step in range(2):
            any_deleted = 0
            for r in range(h):
                for c in range(w):
                    m[r, c] = 0
                    if s[r, c] == 0:
                        continue
                    # ring P2..P9 = N, NE, E, SE, S, SW, W, NW
                    p[0] = s[r - 1, c] if r > 0 else 0
                    p[1] = s[r - 1, c + 1] if (r > 0 and c + 1 < w) else 0
                    p[2] = s[r, c + 1] if c + 1 < w else 0
                    p[3] = s[r + 1, c + 1] if (r + 1 < h and c + 1 < w) else 0
                    p[4] = s[r + 1, c] if r + 1 < h else 0
                    p[5] = s[r + 1, c - 1] if (r + 1 < h and c > 0) else 0
                    p[6] = s[r, c - 1] if c > 0 else 0
                    p[7] = s[r - 1, c - 1] if (r > 0 and c > 0) else 0
                    p[8] = p[0]
                    b = p[0] + p[1] + p[2] + p[3] + p[4] + p[5] + p[6] + p[7]
                    if b < 2 or b > 6:
                        continue
                    a = 0
                    for k in range(8):
                        if p[k] == 0 and p[k + 1] == 1:
                            a += 1
                    if a != 1:
                        continue
                    if step == 0:
                        if p[0] * p[2] * p[4] == 0 and p[2] * p[4] * p[6] == 0:
                            m[r, c] = 1
                            any_deleted = 1
                    else:
                        if p[0] * p[2] * p[6] == 0 and p[0] * p[4] * p[6] == 0:
                            m[r, c] = 1
                            any_deleted = 1
            if any_deleted:
                changed = 1
                for r in range(h):
                    for c in range(w):
                        if m[r, c]:
                            s[r, c] = 0
        if not changed:
            return sk


cdef inline bint _line_blocked(const cnp.uint8_t[:, ::1] blocked,
                               Py_ssize_t r0, Py_ssize_t c0,
                               Py_ssize_t r1, Py_ssize_t c1) nogil:
    cdef Py_ssize_t dr = r1 - r0 if r1 >= r0 else r0 - r1
    cdef Py_ssize_t dc = c1 - c0 if c1 >= c0 else c0 - c1
    cdef Py_ssize_t sr = 1 if r0 < r1 else -1
    cdef Py_ssize_t sc = 1 if c0 < c1 else -1
    cdef Py_ssize_t err = dc - dr
    cdef Py_ssize_t e2, r = r0, c = c0
    while True:
        if r == r1 and c == c1:
            return False
        e2 = 2 * err
        if e2 > -dr:
            err -= dr
            c += sc
        if e2 < dc:
            err += dc
            r += sr
        if r == r1 and c == c1:
            return False
        if blocked[r, c]:
            return True


def line_blocked(blocked, int r0, int c0, int r1, int c1):
    cdef cnp.uint8_t[:, ::1] b = np.ascontiguousarray(blocked, dtype=np.uint8)
    return bool(_line_blocked(b, r0, c0, r1, c1))


def visible_mask(blocked, int r0, int c0, rows, cols,
                 double ux, double uy, double cos_half_fov,
                 double range_m, double resolution):
    cdef cnp.uint8_t[:, ::1] blk = np.ascontiguousarray(blocked, dtype=np.uint8)
    cdef cnp.int64_t[::1] rs = np.ascontiguousarray(rows, dtype=np.int64)
    cdef cnp.int64_t[::1] cs = np.ascontiguousarray(cols, dtype=np.int64)
    cdef Py_ssize_t n = rs.shape[0]
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] out = np.zeros(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] o = out
    cdef Py_ssize_t i
    cdef long dr, dc
    cdef double dist
    with nogil:
        for i in range(n):
            dr = rs[i] - r0
            dc = cs[i] - c0
            if dr == 0 and dc == 0:
                o[i] = 1
                continue
            dist = sqrt(<double> (dr * dr + dc * dc))
            if dist * resolution > range_m:
                continue
            if dc * ux + dr * uy < cos_half_fov * dist:
                continue
            if not _line_blocked(blk, r0, c0, rs[i], cs[i]):
                o[i] = 1
    return out
