"""Sparsified Voronoi skeleton graph of a floor plan.

Pipeline: tessellate (generalized-Voronoi ridge of the occupied set) ->
dilate (5x5) -> thin (Zhang-Suen) -> prune short spurs -> pixel graph ->
sparsify (remove collinear pass-through nodes, summing edge weights).

The ridge is extracted from the Euclidean distance transform: a free
interior pixel belongs to the ridge when it has two nearly equidistant
nearest obstacle pixels that are distinct, i.e. farther apart than
max(MIN_GENERATOR_SEPARATION_PX, own clearance). Tolerances are recorded
in the exported graph metadata.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import _kernels
from .errors import EmptyFreeSpaceError
from .gridmap import GridMap, InteriorMask

RIDGE_TOLERANCE_PX = 1.0
MIN_GENERATOR_SEPARATION_PX = 2.0
COLLINEAR_TOLERANCE_PX = 0.5
SPUR_MIN_PX = 4
DILATE_KERNEL = 5

TOLERANCES = {
    "ridge_tolerance_px": RIDGE_TOLERANCE_PX,
    "min_generator_separation_px": MIN_GENERATOR_SEPARATION_PX,
    "collinear_tolerance_px": COLLINEAR_TOLERANCE_PX,
    "spur_min_px": SPUR_MIN_PX,
    "dilate_kernel_px": DILATE_KERNEL,
}


def generators_distinct(
    a: tuple[int, int],
    b: tuple[int, int],
    clearance: float,
    free: np.ndarray,
    _cache: dict | None = None,
) -> bool:
    """Whether two obstacle pixels act as distinct Voronoi generators
    for a point at the given clearance.

    Far-apart generators (farther than the clearance) are distinct
    outright. Nearby ones are distinct only when the straight segment
    between them crosses free space, i.e. they flank an opening such as
    a doorway; points of one contiguous wall face never qualify.
    """
    sep2 = (a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2
    m = MIN_GENERATOR_SEPARATION_PX
    if sep2 <= m * m:
        return False
    if sep2 > max(m, clearance) ** 2:
        return True
    key = (a, b) if a <= b else (b, a)
    if _cache is not None and key in _cache:
        return _cache[key]
    grid = np.ascontiguousarray(free, dtype=np.uint8)
    crosses = bool(_kernels.line_blocked(grid, a[0], a[1], b[0], b[1]))
    if _cache is not None:
        _cache[key] = crosses
    return crosses


def tessellate(gm: GridMap, im: InteriorMask) -> np.ndarray:
    """Ridge image: interior free pixels on the generalized Voronoi
    diagram of the blocked set.

    Uses the distance/feature transform: a pixel is marked when one of
    its 8-neighbors has a nearest-obstacle pixel distinct from its own
    (see generators_distinct); the pixel pair is then nearly equidistant
    between two distinct generators. Of each such pair the larger-
    clearance side is marked (both on ties), keeping the ridge
    strip-like so dilation + thinning preserves its arms.
    """
    valid = gm.free() & im.mask
    if not valid.any():
        if not im.mask.any():
            return np.zeros(gm.cells.shape, dtype=bool)
        raise EmptyFreeSpaceError("no free cells inside the building boundary")

    free = gm.free()
    blocked = gm.blocked()
    dist, (fr, fc) = ndimage.distance_transform_edt(~blocked, return_indices=True)

    ridge = np.zeros(gm.cells.shape, dtype=bool)
    h, w = gm.cells.shape
    min_sep2 = MIN_GENERATOR_SEPARATION_PX**2
    free_u8 = free.astype(np.uint8)
    crossing_cache: dict[tuple, bool] = {}
    shifts = [(0, 1), (1, 0), (1, 1), (1, -1)]  # each unordered neighbor pair once
    for dr, dc in shifts:
        a_sl = (slice(max(0, -dr), h - max(0, dr)), slice(max(0, -dc), w - max(0, dc)))
        b_sl = (
            slice(max(0, -dr) + dr, h - max(0, dr) + dr),
            slice(max(0, -dc) + dc, w - max(0, dc) + dc),
        )
        sep2 = (fr[a_sl] - fr[b_sl]).astype(np.int64) ** 2 + (
            fc[a_sl] - fc[b_sl]
        ).astype(np.int64) ** 2
        both_valid = valid[a_sl] & valid[b_sl]
        clearance = np.minimum(dist[a_sl], dist[b_sl])
        thresh = np.maximum(MIN_GENERATOR_SEPARATION_PX, clearance)
        hit = (sep2 > thresh**2) & both_valid

        # near generators flanking an opening (e.g. door jambs)
        maybe = (sep2 > min_sep2) & ~hit & both_valid
        if maybe.any():
            rows, cols = np.nonzero(maybe)
            ar = fr[a_sl][rows, cols]
            ac = fc[a_sl][rows, cols]
            br = fr[b_sl][rows, cols]
            bc = fc[b_sl][rows, cols]
            opening = np.zeros(len(rows), dtype=bool)
            for k in range(len(rows)):
                opening[k] = generators_distinct(
                    (int(ar[k]), int(ac[k])),
                    (int(br[k]), int(bc[k])),
                    float(clearance[rows[k], cols[k]]),
                    free_u8,
                    crossing_cache,
                )
            hit[rows[opening], cols[opening]] = True

        ridge[a_sl] |= hit & (dist[a_sl] >= dist[b_sl])
        ridge[b_sl] |= hit & (dist[b_sl] >= dist[a_sl])
    return ridge


def dilate(img: np.ndarray, gm: GridMap, im: InteriorMask) -> np.ndarray:
    """Morphological dilation with a full 5x5 kernel, clipped to free
    interior cells."""
    grown = ndimage.binary_dilation(img, structure=np.ones((DILATE_KERNEL, DILATE_KERNEL)))
    return grown & gm.free() & im.mask


def thin(img: np.ndarray) -> np.ndarray:
    """Zhang-Suen thinning to fixpoint; 8-connected, one pixel wide."""
    return _kernels.thin(np.asarray(img, dtype=np.uint8)).astype(bool)


def _neighbor_count(img: np.ndarray) -> np.ndarray:
    padded = np.pad(img.astype(np.uint8), 1)
    count = np.zeros(img.shape, dtype=np.int32)
    h, w = img.shape
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == 0 and dc == 0:
                continue
            count += padded[1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w]
    return count


def _skeleton_neighbors(sk: np.ndarray, rc: tuple[int, int]) -> list[tuple[int, int]]:
    h, w = sk.shape
    r, c = rc
    return [
        (r + dr, c + dc)
        for dr in (-1, 0, 1)
        for dc in (-1, 0, 1)
        if (dr or dc) and 0 <= r + dr < h and 0 <= c + dc < w and sk[r + dr, c + dc]
    ]


def _mutually_connected(pixels: list[tuple[int, int]]) -> bool:
    """Whether a pixel set stays 8-connected among themselves."""
    if len(pixels) <= 1:
        return True
    todo = {pixels[0]}
    seen: set[tuple[int, int]] = set()
    rest = set(pixels)
    while todo:
        p = todo.pop()
        seen.add(p)
        for q in rest:
            if q not in seen and max(abs(p[0] - q[0]), abs(p[1] - q[1])) == 1:
                todo.add(q)
    return seen == rest


def prune_spurs(img: np.ndarray, min_len: int = SPUR_MIN_PX) -> np.ndarray:
    """Remove skeleton branches (and isolated fragments) shorter than
    min_len pixels, repeating until stable.

    A branch runs from an endpoint to the first pixel with other
    neighbors; that junction pixel is absorbed into the removal when its
    remaining neighbors stay mutually connected without it (it was only
    a bump left by the branch)."""
    sk = img.astype(bool).copy()
    while True:
        count = _neighbor_count(sk)
        endpoints = np.argwhere(sk & (count <= 1))
        remove: set[tuple[int, int]] = set()
        for r0, c0 in map(tuple, endpoints):
            chain = [(int(r0), int(c0))]
            prev = None
            cur = chain[0]
            # the walk may include the junction pixel, hence min_len + 1
            while len(chain) <= min_len:
                nbrs = [p for p in _skeleton_neighbors(sk, cur) if p != prev]
                if len(nbrs) == 0:
                    if len(chain) < min_len:
                        remove.update(chain)  # isolated short fragment
                    break
                if len(nbrs) > 1:
                    chain.pop()  # cur is where the branch meets the rest
                    if _mutually_connected(nbrs):
                        # cur is a mere bump on a thicker structure and
                        # counts as part of the branch
                        if len(chain) + 1 < min_len:
                            remove.update(chain)
                            remove.add(cur)
                    elif len(chain) < min_len:
                        remove.update(chain)
                    break
                prev, cur = cur, nbrs[0]
                chain.append(cur)
        if not remove:
            return sk
        for rc in remove:
            sk[rc] = False


@dataclass
class VoronoiGraph:
    """Skeleton graph; node ids index pixel coordinates, adjacency maps
    node -> neighbor -> weight in pixels."""

    pixels: dict[int, tuple[int, int]]
    adj: dict[int, dict[int, float]] = field(repr=False)

    @property
    def node_count(self) -> int:
        return len(self.pixels)

    @property
    def edge_count(self) -> int:
        return sum(len(nbrs) for nbrs in self.adj.values()) // 2

    def edges(self) -> list[tuple[int, int, float]]:
        out = []
        for a in sorted(self.adj):
            for b, wgt in sorted(self.adj[a].items()):
                if a < b:
                    out.append((a, b, wgt))
        return out

    def to_dict(self, gm: GridMap | None = None) -> dict:
        doc = {
            "nodes": [
                {"id": i, "row": rc[0], "col": rc[1]} for i, rc in sorted(self.pixels.items())
            ],
            "edges": [{"a": a, "b": b, "weight_px": wgt} for a, b, wgt in self.edges()],
            "params": dict(TOLERANCES),
        }
        if gm is not None:
            doc["map"] = {
                "width": gm.width,
                "height": gm.height,
                "resolution": gm.resolution,
                "origin_x": gm.origin_x,
                "origin_y": gm.origin_y,
            }
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "VoronoiGraph":
        pixels = {n["id"]: (n["row"], n["col"]) for n in doc["nodes"]}
        adj: dict[int, dict[int, float]] = {i: {} for i in pixels}
        for e in doc["edges"]:
            adj[e["a"]][e["b"]] = float(e["weight_px"])
            adj[e["b"]][e["a"]] = float(e["weight_px"])
        return cls(pixels, adj)

    def save(self, path: str | Path, gm: GridMap | None = None) -> None:
        Path(path).write_text(json.dumps(self.to_dict(gm), indent=1))

    @classmethod
    def load(cls, path: str | Path) -> "VoronoiGraph":
        return cls.from_dict(json.loads(Path(path).read_text()))


def build_pixel_graph(img: np.ndarray) -> VoronoiGraph:
    """One node per skeleton pixel; unit-weight edges between
    8-neighbors (diagonals included). Node ids follow row-major order."""
    coords = np.argwhere(img)
    ids = {(int(r), int(c)): i for i, (r, c) in enumerate(coords)}
    pixels = {i: rc for rc, i in ids.items()}
    adj: dict[int, dict[int, float]] = {i: {} for i in pixels}
    for (r, c), i in ids.items():
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                if dr == 0 and dc == 0:
                    continue
                j = ids.get((r + dr, c + dc))
                if j is not None:
                    adj[i][j] = 1.0
    return VoronoiGraph(pixels, adj)


def _perp_distance(p: tuple[int, int], a: tuple[int, int], b: tuple[int, int]) -> float:
    """Perpendicular distance from p to the segment a-b (a != b)."""
    vr, vc = b[0] - a[0], b[1] - a[1]
    wr, wc = p[0] - a[0], p[1] - a[1]
    return abs(vr * wc - vc * wr) / math.hypot(vr, vc)


def sparsify(g: VoronoiGraph) -> VoronoiGraph:
    """Remove pass-through nodes: degree-2 nodes lying on the straight
    line through their neighbors (perpendicular distance below
    COLLINEAR_TOLERANCE_PX). Neighbors are reconnected with the summed
    weight; repeated to fixpoint in ascending node-id order."""
    pixels = dict(g.pixels)
    adj = {i: dict(nbrs) for i, nbrs in g.adj.items()}
    heap = sorted(adj)
    heapq.heapify(heap)
    while heap:
        i = heapq.heappop(heap)
        nbrs = adj.get(i)
        if nbrs is None or len(nbrs) != 2:
            continue
        (a, wa), (b, wb) = sorted(nbrs.items())
        if _perp_distance(pixels[i], pixels[a], pixels[b]) >= COLLINEAR_TOLERANCE_PX:
            continue
        merged = wa + wb
        if b in adj[a]:
            # parallel route already exists; keep the shorter one
            merged = min(merged, adj[a][b])
        del adj[i]
        del pixels[i]
        adj[a].pop(i)
        adj[b].pop(i)
        adj[a][b] = merged
        adj[b][a] = merged
        # neighborhood geometry changed; re-examine both survivors
        heapq.heappush(heap, a)
        heapq.heappush(heap, b)
    return VoronoiGraph(pixels, adj)


def skeletonize(gm: GridMap, im: InteriorMask) -> np.ndarray:
    """tessellate -> dilate -> thin -> prune; the cleaned skeleton image."""
    ridge = tessellate(gm, im)
    return prune_spurs(thin(dilate(ridge, gm, im)))


def build_graph(gm: GridMap, im: InteriorMask) -> VoronoiGraph:
    """Full pipeline from a grid map to the sparsified Voronoi graph."""
    return sparsify(build_pixel_graph(skeletonize(gm, im)))
