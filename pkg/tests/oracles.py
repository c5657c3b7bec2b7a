"""Independent reference implementations used as test oracles. These
deliberately avoid the library's fast paths: per-pixel scans, dense
solves, explicit matrix algebra.
"""

import numpy as np

from mapbench.voronoi import RIDGE_TOLERANCE_PX, generators_distinct


def brute_force_ridge(gm, im) -> np.ndarray:
    """Literal two-nearest-distinct-obstacle equidistance scan: for each
    free interior pixel, the nearest obstacle and the nearest obstacle
    distinct from it must be within the ridge tolerance of each other."""
    blocked = gm.blocked()
    free = np.ascontiguousarray(gm.free(), dtype=np.uint8)
    obs = np.argwhere(blocked)
    obsf = obs.astype(float)
    valid = gm.free() & im.mask
    ridge = np.zeros(gm.cells.shape, dtype=bool)
    cache: dict = {}
    for r, c in np.argwhere(valid):
        d = np.hypot(obsf[:, 0] - r, obsf[:, 1] - c)
        k = int(np.argmin(d))
        d1 = float(d[k])
        a = (int(obs[k, 0]), int(obs[k, 1]))
        for m in np.nonzero(d <= d1 + RIDGE_TOLERANCE_PX)[0]:
            b = (int(obs[m, 0]), int(obs[m, 1]))
            if b == a:
                continue
            if generators_distinct(a, b, d1, free, cache):
                ridge[r, c] = True
                break
    return ridge


def hausdorff_px(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric Hausdorff distance between two pixel sets."""
    pa = np.argwhere(a).astype(float)
    pb = np.argwhere(b).astype(float)
    if len(pa) == 0 or len(pb) == 0:
        return 0.0 if len(pa) == len(pb) else float("inf")
    d = np.hypot(pa[:, None, 0] - pb[None, :, 0], pa[:, None, 1] - pb[None, :, 1])
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def flood_fill_interior(gm) -> np.ndarray:
    """Complement of a 4-connected flood fill from the image border over
    non-occupied cells; oracle for the interior mask on maps whose only
    occupied pixels form the boundary."""
    passable = ~gm.blocked()
    h, w = passable.shape
    outside = np.zeros((h, w), dtype=bool)
    stack = [(r, c) for r in (0, h - 1) for c in range(w) if passable[r, c]]
    stack += [(r, c) for c in (0, w - 1) for r in range(h) if passable[r, c]]
    while stack:
        r, c = stack.pop()
        if outside[r, c]:
            continue
        outside[r, c] = True
        for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if 0 <= nr < h and 0 <= nc < w and passable[nr, nc] and not outside[nr, nc]:
                stack.append((nr, nc))
    return passable & ~outside


def graph_components(g) -> list[int]:
    """Connected-component sizes of a VoronoiGraph, descending."""
    seen: set[int] = set()
    sizes = []
    for s in g.pixels:
        if s in seen:
            continue
        stack = [s]
        comp = set()
        while stack:
            u = stack.pop()
            if u in comp:
                continue
            comp.add(u)
            stack.extend(v for v in g.adj[u] if v not in comp)
        seen |= comp
        sizes.append(len(comp))
    return sorted(sizes, reverse=True)


def dense_gp_mean(x_train, y_train, x_query, length_scale, signal_var, noise_var):
    """Closed-form GP mean via a dense solve (no Cholesky reuse)."""
    x_train = np.atleast_2d(np.asarray(x_train, dtype=float))
    x_query = np.atleast_2d(np.asarray(x_query, dtype=float))

    def k(a, b):
        d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
        return signal_var * np.exp(-d2 / (2 * length_scale**2))

    kxx = k(x_train, x_train) + noise_var * np.eye(len(x_train))
    w = np.linalg.solve(kxx, np.asarray(y_train, dtype=float))
    return k(x_query, x_train) @ w
