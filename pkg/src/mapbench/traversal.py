"""Sensor-limited exploration simulated on the Voronoi graph.

A virtual robot starts at the graph node nearest its starting pose,
marks every node its range-and-FOV-limited sensor can see, walks to the
nearest unseen node along Dijkstra shortest paths (perceiving after
every single-node step), and repeats until no reachable node is unseen.
Accumulated translation and rotation are the VTD (m) and VTR (rad)
features. Entirely deterministic: no randomness anywhere.
"""

from __future__ import annotations

import hashlib
import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import EmptyFreeSpaceError
from .geometry import wrap_angle
from .gridmap import GridMap
from .voronoi import VoronoiGraph

DEFAULT_FOV_RAD = math.radians(270.0)
DEFAULT_ANGULAR_RES_RAD = math.radians(0.5)
DEFAULT_RANGE_M = 30.0
DEFAULT_ROTATION_MIN_DIST_M = 0.5


@dataclass(frozen=True)
class SensorConfig:
    """Range sensor model used during the simulated exploration."""

    fov: float = DEFAULT_FOV_RAD  # rad
    angular_resolution: float = DEFAULT_ANGULAR_RES_RAD  # rad
    range_m: float = DEFAULT_RANGE_M

    def __post_init__(self):
        if not 0 < self.fov <= 2 * math.pi:
            raise ValueError(f"fov must be in (0, 2*pi], got {self.fov}")
        if not self.range_m > 0:
            raise ValueError(f"range must be > 0, got {self.range_m}")


@dataclass
class VirtualRobotState:
    node: int
    heading: float
    seen: set[int] = field(default_factory=set)


@dataclass
class TraversalLeg:
    target: int
    path: list[int]
    distance_m: float
    rotation_rad: float


@dataclass
class TraversalResult:
    vtd_m: float
    vtr_rad: float
    visit_order: list[int]
    legs: list[TraversalLeg]

    def digest(self) -> str:
        """Stable fingerprint of the traversal for consistency checks."""
        h = hashlib.sha256()
        h.update(np.asarray(self.visit_order, dtype=np.int64).tobytes())
        h.update(np.asarray([self.vtd_m, self.vtr_rad], dtype=np.float64).tobytes())
        return h.hexdigest()


def visible_nodes(
    gm: GridMap,
    g: VoronoiGraph,
    node: int,
    heading: float,
    sensor: SensorConfig,
    candidates: np.ndarray | None = None,
) -> set[int]:
    """Graph nodes visible from `node` with the given heading.

    A node is visible iff it is within sensor range (metric), its bearing
    lies within +-fov/2 of the heading, and no blocked cell lies on the
    Bresenham segment between the two pixels (endpoints excluded).
    """
    ids = np.fromiter(sorted(g.pixels), dtype=np.int64) if candidates is None else candidates
    if len(ids) == 0:
        return set()
    coords = np.array([g.pixels[i] for i in ids], dtype=np.int64)
    mask = _visible(gm, g, node, heading, sensor, coords)
    return {int(i) for i in ids[mask.astype(bool)]}


def _visible(gm, g, node, heading, sensor, coords):
    r0, c0 = g.pixels[node]
    return _kernels.visible_mask(
        gm.blocked().astype(np.uint8),
        int(r0),
        int(c0),
        coords[:, 0],
        coords[:, 1],
        math.cos(heading),
        math.sin(heading),
        math.cos(sensor.fov / 2.0),
        sensor.range_m,
        gm.resolution,
    )


def dijkstra(g: VoronoiGraph, source: int) -> tuple[dict[int, float], dict[int, int]]:
    """Shortest-path distances (px) and predecessors from source.

    Deterministic: equal-distance relaxations keep the smaller
    predecessor id.
    """
    dist = {source: 0.0}
    pred: dict[int, int] = {}
    done: set[int] = set()
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for v, w in g.adj[u].items():
            nd = d + w
            if v not in dist or nd < dist[v]:
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
            elif nd == dist[v] and v not in done and pred.get(v, u) > u:
                pred[v] = u
    return dist, pred


def _path_from(pred: dict[int, int], source: int, target: int) -> list[int]:
    path = [target]
    while path[-1] != source:
        path.append(pred[path[-1]])
    path.reverse()
    return path


def nearest_frontier(g: VoronoiGraph, state: VirtualRobotState) -> int | None:
    """Unseen node with minimum Dijkstra distance from the current node;
    ties break on the smaller node id. None when every reachable node
    has been seen."""
    dist, _ = dijkstra(g, state.node)
    best = None
    for i, d in dist.items():
        if i in state.seen:
            continue
        if best is None or (d, i) < best:
            best = (d, i)
    return best[1] if best else None


def nearest_node(g: VoronoiGraph, gm: GridMap, x: float, y: float) -> int:
    """Graph node whose pixel is closest to the metric point (x, y)."""
    if g.node_count == 0:
        raise EmptyFreeSpaceError("Voronoi graph is empty; no node near start pose")
    pr, pc = gm.pixel_of(x, y)
    best = None
    for i in sorted(g.pixels):
        r, c = g.pixels[i]
        d = (r - pr) ** 2 + (c - pc) ** 2
        if best is None or (d, i) < best:
            best = (d, i)
    return best[1]


def simulate_exploration(
    gm: GridMap,
    g: VoronoiGraph,
    start_xy: tuple[float, float],
    sensor: SensorConfig | None = None,
    initial_heading: float = 0.0,
    rotation_min_dist_m: float = DEFAULT_ROTATION_MIN_DIST_M,
) -> TraversalResult:
    """Run the exploration loop and accumulate traversal distance and
    rotation.

    Distance grows by the Euclidean pixel distance (times resolution) of
    every single-node step; rotation grows by the absolute minimal
    angular difference between the heading and the step direction, but
    only on steps at least rotation_min_dist_m long, which also update
    the heading. Unreachable graph components are ignored.
    """
    sensor = sensor or SensorConfig()
    blocked = gm.blocked().astype(np.uint8)
    start = nearest_node(g, gm, *start_xy)

    ids = np.fromiter(sorted(g.pixels), dtype=np.int64)
    coords = np.array([g.pixels[i] for i in ids], dtype=np.int64)
    index_of = {int(node_id): k for k, node_id in enumerate(ids)}
    seen = np.zeros(len(ids), dtype=bool)

    cos_half_fov = math.cos(sensor.fov / 2.0)

    def perceive(node: int, heading: float) -> None:
        unseen_idx = np.nonzero(~seen)[0]
        if len(unseen_idx) == 0:
            return
        r0, c0 = g.pixels[node]
        vis = _kernels.visible_mask(
            blocked,
            int(r0),
            int(c0),
            coords[unseen_idx, 0],
            coords[unseen_idx, 1],
            math.cos(heading),
            math.sin(heading),
            cos_half_fov,
            sensor.range_m,
            gm.resolution,
        )
        seen[unseen_idx[vis.astype(bool)]] = True

    state = VirtualRobotState(node=start, heading=initial_heading)
    seen[index_of[start]] = True
    perceive(start, state.heading)

    vtd = 0.0
    vtr = 0.0
    visit_order = [start]
    legs: list[TraversalLeg] = []

    while True:
        dist, pred = dijkstra(g, state.node)
        best = None
        for i, d in dist.items():
            if not seen[index_of[i]] and (best is None or (d, i) < best):
                best = (d, i)
        if best is None:
            break
        target = best[1]
        path = _path_from(pred, state.node, target)
        leg_dist = 0.0
        leg_rot = 0.0
        for u, v in zip(path[:-1], path[1:]):
            (ur, uc), (vr, vc) = g.pixels[u], g.pixels[v]
            step_m = math.hypot(vr - ur, vc - uc) * gm.resolution
            vtd += step_m
            leg_dist += step_m
            if step_m >= rotation_min_dist_m:
                direction = math.atan2(vr - ur, vc - uc)
                turn = abs(wrap_angle(direction - state.heading))
                vtr += turn
                leg_rot += turn
                state.heading = direction
            state.node = v
            visit_order.append(v)
            seen[index_of[v]] = True
            perceive(v, state.heading)
        legs.append(TraversalLeg(target, path, leg_dist, leg_rot))

    state.seen = {int(i) for i in ids[seen]}
    return TraversalResult(vtd, vtr, visit_order, legs)
