"""Pure-Python/NumPy implementations of the hot kernels.

These are the reference semantics; the compiled extension in _native.pyx
must produce bit-identical results (enforced by the parity tests).
"""

from __future__ import annotations

import math

import numpy as np


def thin(img: np.ndarray) -> np.ndarray:
    """Zhang-Suen two-subiteration thinning to fixpoint.

    Each subiteration scans the whole image synchronously: deletions are
    computed from a snapshot and applied at once.
    """
    sk = (np.asarray(img) != 0).astype(np.uint8)
    while True:
        changed = False
        for step in (0, 1):
            padded = np.pad(sk, 1)
            p2 = padded[:-2, 1:-1]  # N
            p3 = padded[:-2, 2:]  # NE
            p4 = padded[1:-1, 2:]  # E
            p5 = padded[2:, 2:]  # SE
            p6 = padded[2:, 1:-1]  # S
            p7 = padded[2:, :-2]  # SW
            p8 = padded[1:-1, :-2]  # W
            p9 = padded[:-2, :-2]  # NW
            ring = (p2, p3, p4, p5, p6, p7, p8, p9, p2)
            b = sum(int_arr.astype(np.int32) for int_arr in ring[:8])
            a = sum(((ring[k] == 0) & (ring[k + 1] == 1)) for k in range(8))
            if step == 0:
                cond = (p2 * p4 * p6 == 0) & (p4 * p6 * p8 == 0)
            else:
                cond = (p2 * p4 * p8 == 0) & (p2 * p6 * p8 == 0)
            delete = (sk == 1) & (b >= 2) & (b <= 6) & (a == 1) & cond
            if delete.any():
                sk[delete] = 0
                changed = True
        if not changed:
            return sk


def line_blocked(blocked: np.ndarray, r0: int, c0: int, r1: int, c1: int) -> bool:
    """True if any blocked pixel lies on the Bresenham segment from
    (r0, c0) to (r1, c1), endpoints excluded."""
    dr = abs(r1 - r0)
    dc = abs(c1 - c0)
    sr = 1 if r0 < r1 else -1
    sc = 1 if c0 < c1 else -1
    err = dc - dr
    r, c = r0, c0
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


def visible_mask(
    blocked: np.ndarray,
    r0: int,
    c0: int,
    rows: np.ndarray,
    cols: np.ndarray,
    ux: float,
    uy: float,
    cos_half_fov: float,
    range_m: float,
    resolution: float,
) -> np.ndarray:
    """Visibility of candidate pixels from (r0, c0).

    A candidate is visible iff its metric distance is within range, its
    bearing lies within the field of view around the heading direction
    (ux, uy), and the Bresenham ray to it crosses no blocked pixel.
    The candidate standing on the viewer is visible.
    """
    n = len(rows)
    out = np.zeros(n, dtype=np.uint8)
    for i in range(n):
        dr = int(rows[i]) - r0
        dc = int(cols[i]) - c0
        if dr == 0 and dc == 0:
            out[i] = 1
            continue
        dist = math.sqrt(float(dr * dr + dc * dc))
        if dist * resolution > range_m:
            continue
        # bearing check without atan2: cos(angle to heading) >= cos(fov/2)
        if dc * ux + dr * uy < cos_half_fov * dist:
            continue
        if not line_blocked(blocked, r0, c0, int(rows[i]), int(cols[i])):
            out[i] = 1
    return out
