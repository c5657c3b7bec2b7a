"""Per-environment feature vector: Voronoi traversal distance/rotation
plus simple structural descriptors (area, perimeter, graph size).
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .gridmap import GridMap, free_interior_area_m2, interior_mask, perimeter_m
from .traversal import SensorConfig, TraversalResult, simulate_exploration
from .voronoi import build_graph

FEATURE_NAMES = ["vtd_m", "vtr_rad", "area_m2", "perimeter_m", "node_count", "edge_count"]


@dataclass
class FeatureVector:
    vtd_m: float
    vtr_rad: float
    area_m2: float
    perimeter_m: float
    node_count: int
    edge_count: int
    trace_digest: str = ""

    def as_dict(self) -> dict:
        return asdict(self)

    def values(self) -> dict[str, float]:
        """Numeric predictors keyed by feature name."""
        return {name: float(getattr(self, name)) for name in FEATURE_NAMES}

    @classmethod
    def from_dict(cls, doc: dict) -> "FeatureVector":
        return cls(**{k: doc[k] for k in [*FEATURE_NAMES, "trace_digest"] if k in doc})


def default_start(gm: GridMap, mask: np.ndarray) -> tuple[float, float]:
    """Centroid of the interior, in metric coordinates. The traversal
    snaps it to the nearest graph node."""
    rows, cols = np.nonzero(mask)
    return gm.metric_of(float(rows.mean()), float(cols.mean()))


def extract_features(
    gm: GridMap,
    sensor: SensorConfig | None = None,
    start_xy: tuple[float, float] | None = None,
    initial_heading: float = 0.0,
) -> tuple[FeatureVector, TraversalResult]:
    """Run the full pipeline on a floor plan.

    interior mask -> Voronoi graph -> simulated exploration; returns the
    assembled feature vector together with the traversal trace.
    """
    im = interior_mask(gm)
    graph = build_graph(gm, im)
    if start_xy is None:
        start_xy = default_start(gm, im.mask)
    result = simulate_exploration(gm, graph, start_xy, sensor, initial_heading)
    fv = FeatureVector(
        vtd_m=result.vtd_m,
        vtr_rad=result.vtr_rad,
        area_m2=free_interior_area_m2(gm, im),
        perimeter_m=perimeter_m(gm, im),
        node_count=graph.node_count,
        edge_count=graph.edge_count,
        trace_digest=result.digest(),
    )
    return fv, result
