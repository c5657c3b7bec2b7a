"""Occupancy-grid floor plans: loading, thresholding, and the interior
mask that separates the inside of a building from the outside.

Cells are Free, Occupied, or Unknown. Unknown cells are treated like
Occupied for boundary and visibility purposes (conservative choice; the
floor plans this tool targets are effectively binary).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import MapLoadError, NoBoundaryError

DEFAULT_OCC_THRESH = 50
DEFAULT_FREE_THRESH = 205

# Rendered gray levels; chosen so that re-thresholding a rendered map
# reproduces the cell array exactly.
RENDER_LEVELS = {0: 255, 1: 0, 2: 128}  # Free, Occupied, Unknown


class CellState(enum.IntEnum):
    FREE = 0
    OCCUPIED = 1
    UNKNOWN = 2


@dataclass
class MapMeta:
    """Load options for a raster floor plan."""

    resolution: float | None = None  # m per pixel
    origin_x: float = 0.0
    origin_y: float = 0.0
    occ_thresh: int = DEFAULT_OCC_THRESH
    free_thresh: int = DEFAULT_FREE_THRESH


@dataclass
class GridMap:
    """2-D occupancy grid with metric resolution.

    cells is a (height, width) uint8 array of CellState values; origin is
    the metric coordinate of pixel (row 0, col 0), with x along columns
    and y along rows.
    """

    cells: np.ndarray
    resolution: float
    origin_x: float = 0.0
    origin_y: float = 0.0

    def __post_init__(self):
        if self.cells.ndim != 2 or self.cells.size == 0:
            raise MapLoadError("grid map must be a non-empty 2-D array")
        if not self.resolution > 0:
            raise MapLoadError(f"resolution must be > 0, got {self.resolution}")
        self.cells = np.ascontiguousarray(self.cells, dtype=np.uint8)

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    def free(self) -> np.ndarray:
        return self.cells == CellState.FREE

    def blocked(self) -> np.ndarray:
        """Occupied or Unknown; what stops rays and traversal."""
        return self.cells != CellState.FREE

    def occupied(self) -> np.ndarray:
        return self.cells == CellState.OCCUPIED

    def pixel_of(self, x: float, y: float) -> tuple[float, float]:
        """Metric point -> continuous (row, col) pixel coordinates."""
        return (y - self.origin_y) / self.resolution, (x - self.origin_x) / self.resolution

    def metric_of(self, row: float, col: float) -> tuple[float, float]:
        return self.origin_x + col * self.resolution, self.origin_y + row * self.resolution


def threshold_image(gray: np.ndarray, occ_thresh: int, free_thresh: int) -> np.ndarray:
    """Map 8-bit intensities to cell states.

    v <= occ_thresh -> Occupied, v >= free_thresh -> Free, else Unknown.
    """
    cells = np.full(gray.shape, CellState.UNKNOWN, dtype=np.uint8)
    cells[gray <= occ_thresh] = CellState.OCCUPIED
    cells[gray >= free_thresh] = CellState.FREE
    return cells


def render_image(gm: GridMap) -> np.ndarray:
    """Render cells back to 8-bit gray. Thresholding the result with the
    default thresholds reproduces the cell array."""
    gray = np.empty(gm.cells.shape, dtype=np.uint8)
    for state, level in RENDER_LEVELS.items():
        gray[gm.cells == state] = level
    return gray


def _read_sidecar(path: Path) -> dict[str, float]:
    """Parse a `key: value` sidecar metadata file next to the image."""
    meta = {}
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#") or ":" not in line:
            continue
        key, value = line.split(":", 1)
        try:
            meta[key.strip()] = float(value.strip())
        except ValueError:
            raise MapLoadError(f"{path}: cannot parse value for '{key.strip()}'")
    return meta


def load_gridmap(path: str | Path, meta: MapMeta | None = None) -> GridMap:
    """Load a PGM (P5) or grayscale PNG floor plan.

    The resolution must come from `meta` or from a `<image>.meta` sidecar
    file; there is no silent default.
    """
    path = Path(path)
    meta = meta or MapMeta()
    try:
        img = Image.open(path)
        gray = np.asarray(img.convert("L"))
    except FileNotFoundError:
        raise MapLoadError(f"no such file: {path}")
    except Exception as exc:  # Pillow raises a mix of OSError subclasses
        raise MapLoadError(f"cannot read raster {path}: {exc}")
    if gray.size == 0:
        raise MapLoadError(f"{path}: zero-area image")

    resolution = meta.resolution
    origin_x, origin_y = meta.origin_x, meta.origin_y
    sidecar = path.with_name(path.name + ".meta")
    if sidecar.exists():
        side = _read_sidecar(sidecar)
        if resolution is None:
            resolution = side.get("resolution")
        origin_x = side.get("origin_x", origin_x)
        origin_y = side.get("origin_y", origin_y)
    if resolution is None:
        raise MapLoadError(
            f"{path}: no resolution given; pass --resolution or provide {sidecar.name}"
        )

    cells = threshold_image(gray, meta.occ_thresh, meta.free_thresh)
    return GridMap(cells, resolution, origin_x, origin_y)


def save_pgm(gm: GridMap, path: str | Path) -> None:
    Image.fromarray(render_image(gm), mode="L").save(Path(path))


# Moore neighborhood in clockwise order starting East (dr, dc).
_MOORE = [(0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1)]
_MOORE_INDEX = {v: i for i, v in enumerate(_MOORE)}


def _trace_contour(occ: np.ndarray, start: tuple[int, int]) -> list[tuple[int, int]]:
    """Moore-neighbor boundary trace around one 8-connected occupied
    component, starting at its row-major-first pixel.

    Returns the traversed boundary pixels in order (with repeats on 1-px
    spurs). The walk closes when the first directed move repeats.
    """
    h, w = occ.shape

    def is_occ(rc):
        r, c = rc
        return 0 <= r < h and 0 <= c < w and occ[r, c]

    contour = [start]
    cur = start
    # Start pixel is row-major first, so its west neighbor is background.
    back = (start[0], start[1] - 1)
    first_move = None
    max_steps = 4 * int(occ.sum()) + 8
    for _ in range(max_steps):
        back_dir = _MOORE_INDEX[(back[0] - cur[0], back[1] - cur[1])]
        nxt = None
        for k in range(1, 9):
            d = (back_dir + k) % 8
            cand = (cur[0] + _MOORE[d][0], cur[1] + _MOORE[d][1])
            if is_occ(cand):
                nxt = cand
                if k > 1:
                    prev = (d - 1) % 8
                    back_next = (cur[0] + _MOORE[prev][0], cur[1] + _MOORE[prev][1])
                else:
                    back_next = back
                break
        if nxt is None:
            return contour  # isolated pixel
        if first_move is None:
            first_move = (cur, nxt)
        elif (cur, nxt) == first_move:
            return contour[:-1]  # drop the re-arrival at the start pixel
        contour.append(nxt)
        cur, back = nxt, back_next
    return contour  # unreachable on valid input; guards against cycles


def longest_contour(gm: GridMap) -> list[tuple[int, int]]:
    """Outer boundary contour of the occupied component with the most
    traversed boundary pixels. Ties break on the smallest starting
    (row, col). Unknown counts as occupied."""
    occ = gm.blocked()
    if not occ.any():
        raise NoBoundaryError("map has no occupied cells; no boundary contour exists")
    labels, n = ndimage.label(occ, structure=np.ones((3, 3), dtype=np.uint8))
    best: list[tuple[int, int]] | None = None
    best_key = None
    for lab, slc in enumerate(ndimage.find_objects(labels), start=1):
        sub = labels[slc] == lab
        r0, c0 = slc[0].start, slc[1].start
        rows, cols = np.nonzero(sub)  # row-major order
        start = (int(rows[0]), int(cols[0]))
        contour = [(r + r0, c + c0) for r, c in _trace_contour(sub, start)]
        key = (-len(contour), start[0] + r0, start[1] + c0)
        if best is None or key < best_key:
            best, best_key = contour, key
    return best


@dataclass
class InteriorMask:
    """Boolean bitmap of pixels strictly inside the building boundary."""

    mask: np.ndarray
    contour: list[tuple[int, int]] = field(repr=False)

    @property
    def contour_length(self) -> int:
        """Boundary length in traversed pixels."""
        return len(self.contour)


def interior_mask(gm: GridMap) -> InteriorMask:
    """Pixels strictly inside the longest occupied boundary contour.

    Computed as the complement of a 4-connected flood fill from the image
    border that cannot cross contour pixels; the contour itself is not
    part of the mask.
    """
    contour = longest_contour(gm)
    on_contour = np.zeros(gm.cells.shape, dtype=bool)
    rs, cs = zip(*contour)
    on_contour[list(rs), list(cs)] = True

    fillable = ~on_contour
    labels, _ = ndimage.label(fillable, structure=np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]]))
    border_labels = np.unique(
        np.concatenate([labels[0, :], labels[-1, :], labels[:, 0], labels[:, -1]])
    )
    border_labels = border_labels[border_labels != 0]
    outside = np.isin(labels, border_labels)
    return InteriorMask(mask=fillable & ~outside, contour=contour)


def free_interior_area_m2(gm: GridMap, im: InteriorMask) -> float:
    """Total area of free cells inside the building."""
    return float(np.count_nonzero(gm.free() & im.mask)) * gm.resolution**2


def perimeter_m(gm: GridMap, im: InteriorMask) -> float:
    """Building perimeter: boundary-contour length in traversed pixels
    times the map resolution."""
    return im.contour_length * gm.resolution
